use std::io::Write;
use std::process::{Command, Output, Stdio};

use infotherm::cycle_laws::{SecondLawVerdict, StimulusLoop};
use infotherm::mc::{validate_entropy_formula, EntropyValidation, Family, SamplingSpec};
use infotherm::optimal::{solve_optimal, TrajectorySample};
use infotherm::sensory::TriplesReport;
use infotherm::state::{summarize, EntropyConstant, InferenceState, NoiseModel, StateSummary};
use infotherm::BudgetProblem;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infotherm"));
    c.env_remove("INFOTHERM_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.code().is_some(),
        "terminated by signal: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn corpus_path() -> String {
    format!("{}/../../data/synthetic_triples.csv", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn state_reports_entropy_and_round_trips() {
    let out = run(&["state", "--m", "4", "--sigma2", "4", "--sigma-r2", "1"]);
    assert!(out.status.success());
    let back: StateSummary<f64> = serde_json::from_slice(&out.stdout).unwrap();
    let noise = NoiseModel::mutual_info(1.0).unwrap();
    let direct = summarize(&InferenceState::new(4.0, 4.0).unwrap(), &noise);
    assert_eq!(back, direct);
    assert!((back.entropy.unwrap() - 0.34657).abs() < 1e-5);
}

#[test]
fn state_in_bits_and_csv() {
    let v = json(&run(&["state", "--m", "4", "--sigma2", "4", "--sigma-r2", "1", "--bits"]));
    assert!((v["entropy"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["units"], "bits");
    let out = run(&["state", "--m", "4", "--sigma2", "4", "--sigma-r2", "1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("partials.dh_dm,-0.0625"));
}

#[test]
fn missing_and_invalid_parameters_fail() {
    let out = run(&["state", "--m", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma2"));
    let out = run(&["state", "--m", "-1", "--sigma2", "1", "--sigma-r2", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"sigma_r2": 1.0, "state": {"m": 100.0, "sigma2": 4.0}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let v = json(&run(&["state", "--config", cfg]));
    assert_eq!(v["m"], 100.0);
    let v = json(&run(&["state", "--config", cfg, "--m", "4"]));
    assert_eq!(v["m"], 4.0);
    assert_eq!(v["sigma2"], 4.0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"m": "four", "sigma2": 1, "sigma_r2": 1}"#).unwrap();
    let out = run(&["state", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`m`"));
}

#[test]
fn optimize_trajectory_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("traj.csv");
    let plot = dir.path().join("traj.dat");
    let out = run(&[
        "optimize", "--m-a", "1", "--m-b", "4", "--work", "1", "--sigma-r2", "1",
        "--format", "csv", "-o", csv_path.to_str().unwrap(), "--plot-data", plot.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<TrajectorySample<f64>> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.first().unwrap().sigma2_opt, 1.0);
    assert_eq!(rows.last().unwrap().sigma2_opt, 0.0);
    assert!((rows.last().unwrap().running_gain - 0.19315).abs() < 1e-5);
    assert!(std::fs::read_to_string(&plot).unwrap().starts_with("# m sigma2_opt"));

    let v = json(&run(&["optimize", "--m-a", "1", "--m-b", "4", "--work", "1", "--sigma-r2", "1", "--nodes", "7"]));
    assert!((v["gain"].as_f64().unwrap() - (2f64.ln() - 0.5)).abs() < 1e-12);
    assert!(v["dp"]["agrees"].as_bool().unwrap());
    let traj: Vec<TrajectorySample<f64>> = serde_json::from_value(v["trajectory"].clone()).unwrap();
    let noise = NoiseModel::mutual_info(1.0).unwrap();
    let direct = solve_optimal(&BudgetProblem::new(1.0, 4.0, 1.0, noise).unwrap()).unwrap();
    assert_eq!(traj, direct.samples(7));
}

#[test]
fn infeasible_budget_is_an_error() {
    let out = run(&["optimize", "--m-a", "1", "--m-b", "16", "--work", "0.1", "--sigma-r2", "1", "--dp-grid", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn path_from_stdin() {
    let input = r#"[{"m":1,"sigma2":2},{"m":4,"sigma2":2}]"#;
    let out = run_stdin(&["path", "--input", "-", "--sigma-r2", "1"], input);
    let v = json(&out);
    assert!(out.status.success());
    assert!((v["sampling_work"].as_f64().unwrap() - 2.0 * 4f64.ln()).abs() < 1e-10);
}

#[test]
fn cycle_rectangle() {
    let e2 = std::f64::consts::E.powi(2);
    let input = format!(
        r#"[{{"m":1,"sigma2":1}},{{"m":1,"sigma2":3}},{{"m":{e2},"sigma2":3}},{{"m":{e2},"sigma2":1}},{{"m":1,"sigma2":1}}]"#
    );
    let out = run_stdin(&["cycle", "--input", "-", "--sigma-r2", "0.5"], &input);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["closure"]["sampling_work"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert_eq!(v["exact"], true);
}

#[test]
fn secondlaw_default_trapezoid() {
    let out = run(&["secondlaw", "--a", "1", "--max-nodes", "400"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let verdict: SecondLawVerdict<f64> = serde_json::from_value(v["verdict"].clone()).unwrap();
    assert!(verdict.holds && verdict.cyclic_info > 0.0);
    let lp: StimulusLoop<f64> = serde_json::from_value(v["loop"].clone()).unwrap();
    assert!(lp.points().len() <= 410);
    assert_eq!(v["verdict"]["orientation"], "counter_clockwise");
}

#[test]
fn secondlaw_on_given_loop_reports_failure_for_nonmonotone_input() {
    let lp = r#"[{"mu":1,"m":1},{"mu":3,"m":1},{"mu":3,"m":4},{"mu":1,"m":4},{"mu":1,"m":1}]"#;
    let out = run_stdin(&["secondlaw", "--loop", "-", "--p", "1"], lp);
    assert!(out.status.success());
    let clockwise = r#"[{"mu":1,"m":1},{"mu":1,"m":4},{"mu":3,"m":4},{"mu":3,"m":1},{"mu":1,"m":1}]"#;
    let v = json(&run_stdin(&["secondlaw", "--loop", "-", "--p", "1"], clockwise));
    assert_eq!(v["verdict"]["orientation_reversed"], true);
}

#[test]
fn adapt_on_synthetic_corpus_passes() {
    let path = corpus_path();
    let out = run(&["adapt", "--triples", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rep: TriplesReport<f64> = serde_json::from_value(v["triples_report"].clone()).unwrap();
    assert_eq!(rep.n_rows, 500);
    assert_eq!(rep.n_pass_lower, 500);
    assert_eq!(rep.n_pass_upper, 500);
}

#[test]
fn adapt_worked_point_and_grid() {
    let out = run(&[
        "adapt", "--k", "2", "--beta", "1", "--p", "2", "--delta-i", "1", "--a", "1",
        "--stimulus", "0,3", "--t-grid", "0:2:5",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    let s = &v["stimuli"][1];
    assert!((s["pr"].as_f64().unwrap() - 17f64.ln()).abs() < 1e-12);
    assert!((s["cycle_balance"].as_f64().unwrap() - 0.7538).abs() < 1e-4);
    assert_eq!(v["stimuli"][0]["cycle_balance"], 0.0);
    assert_eq!(s["response"].as_array().unwrap().len(), 5);

    let csv_out = run(&[
        "adapt", "--k", "2", "--beta", "1", "--p", "2", "--delta-i", "1",
        "--stimulus", "3", "--t-grid", "0,1", "--format", "csv",
    ]);
    let text = String::from_utf8(csv_out.stdout).unwrap();
    assert!(text.starts_with("t,F(I=3)\n0,2.83"), "{text}");
}

#[test]
fn adapt_with_violating_rows_exits_nonzero() {
    let bad = "unit_id,sr,pr,ss\nok,1,4,2\nlow,1,4,1.5\nneg,1,-4,2\n";
    let out = run_stdin(&["adapt", "--triples", "-"], bad);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":4: rejected row"), "{stderr}");
    let v = json(&out);
    assert_eq!(v["triples_report"]["n_rows"], 2);
    assert_eq!(v["triples_report"]["n_pass_lower"], 1);
    let empty = run_stdin(&["adapt", "--triples", "-"], "unit_id,sr,pr,ss\n");
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn validate_matches_library_and_honours_seed_env() {
    let out = bin()
        .args(["validate", "--family", "gaussian", "--variance", "2", "--m", "100", "--sigma-r2", "0.5"])
        .env("INFOTHERM_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["spec"]["seed"], 77);
    let got: EntropyValidation = serde_json::from_value(v["entropy"].clone()).unwrap();
    let spec = SamplingSpec::new(Family::Gaussian { mean: 0.0, variance: 2.0 }, 100, 0.5, 10_000, 77).unwrap();
    let want = validate_entropy_formula(
        &spec,
        EntropyConstant::MutualInfo,
        infotherm::mc::EntropyMethod::NearestNeighbor { k: 10 },
    )
    .unwrap();
    assert_eq!(got, want);
    assert_eq!(got.pass, Some(true));

    let flag_wins = bin().args(["validate", "--seed", "5", "--trials", "200"]).env("INFOTHERM_SEED", "77").output().unwrap();
    assert_eq!(json(&flag_wins)["spec"]["seed"], 5);
}

#[test]
fn validate_poisson_with_scaling_normality_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("ens.csv");
    let out = run(&[
        "validate", "--family", "poisson", "--mean", "10", "--m", "400", "--sigma-r2", "0.1",
        "--seed", "3", "--normality", "--scaling-m", "10,100,1000",
        "--dump-ensemble", dump.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert!(out.status.success(), "{v}");
    assert!(v["entropy"]["gap"].as_f64().unwrap() <= 0.03);
    assert_eq!(v["variance_scaling"]["rows"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(&dump).unwrap().lines().count();
    assert_eq!(lines, 10_001);
}

#[test]
fn validate_diagnostic_mode_has_no_verdict() {
    let v = json(&run(&["validate", "--family", "poisson", "--mean", "10", "--m", "2", "--sigma-r2", "0.1", "--seed", "1"]));
    assert_eq!(v["entropy"]["pass"], Value::Null);
    assert_eq!(v["entropy"]["asymptotic"], false);
}

#[test]
fn corpus_is_reproducible() {
    let a = run(&["corpus", "--n", "20", "--seed", "9"]);
    let b = run(&["corpus", "--n", "20", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 21);
}

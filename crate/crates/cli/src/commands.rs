//! Subcommand implementations. Each returns whether its checks passed.

use anyhow::{bail, Context, Result};
use clap::Args;
use infotherm::cycle_laws::{
    green_check, second_law_check, simulate_driven_cycle, ConstitutiveScaling, DrivenCycle,
    GreenCheck, SamplingDynamics, SecondLawVerdict, StimulusLoop, Waveform,
};
use infotherm::mc::{
    estimate_entropy, normality_check, simulate_estimator, validate_entropy_formula,
    validate_variance_scaling, write_ensemble, EntropyMethod, EntropyValidation, Family,
    NormalityReport, SamplingSpec, VarianceScaling,
};
use infotherm::optimal::{
    dp_oracle, global_efficiency_bound, max_info_bound, optimal_info_gain, solve_optimal, DpGrid,
    GlobalEfficiency, TrajectorySample,
};
use infotherm::paths::{cycle_closure_check, path_report, ClosureReport, CyclePath, ProcessPath};
use infotherm::sensory::{
    cycle_balance, fixed_points, ingest_triples, loop_cycle_balance, synthetic_corpus,
    verify_triples, write_triples, AdaptationParams, FixedPoints, TriplesReport,
};
use infotherm::state::{summarize, EntropyConstant, InferenceState, NoiseModel};
use infotherm::BudgetProblem;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, read_source, required, seed, NumList};
use crate::output::{Sink, Table};

fn noise(sigma_r2: f64, raw_constant: Option<f64>) -> Result<NoiseModel<f64>> {
    Ok(match raw_constant {
        Some(c) => NoiseModel::raw(sigma_r2, c)?,
        None => NoiseModel::mutual_info(sigma_r2)?,
    })
}

fn path_table(path: &ProcessPath<f64>) -> Table {
    let mut t = Table::new(&["m", "sigma2"]);
    t.rows = path.nodes().iter().map(|n| vec![n.m, n.sigma2]).collect();
    t
}

/// Noise-model options shared by the `(m, σ²)` commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct NoiseArgs {
    /// Representation-noise variance.
    #[arg(long)]
    pub sigma_r2: Option<f64>,
    /// Use a raw entropy constant instead of the mutual-information one.
    #[arg(long)]
    pub raw_constant: Option<f64>,
}

impl NoiseArgs {
    fn model(&self) -> Result<NoiseModel<f64>> {
        noise(required(self.sigma_r2, "sigma_r2")?, self.raw_constant)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct StateArgs {
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
}

pub fn state(a: &StateArgs, sink: &Sink) -> Result<bool> {
    let st = InferenceState::new(required(a.m, "m")?, required(a.sigma2, "sigma2")?)?;
    sink.emit(&summarize(&st, &a.noise.model()?), None)?;
    Ok(true)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct PathArgs {
    /// JSON array of {"m", "sigma2"} nodes; `-` reads stdin.
    #[arg(long)]
    pub input: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
    /// Discretization steps per segment for the first-law residual.
    #[arg(long)]
    pub steps: Option<usize>,
}

pub fn path(a: &PathArgs, sink: &Sink) -> Result<bool> {
    let input = a.input.as_deref().context("missing parameter `input` (flag --input)")?;
    let p: ProcessPath<f64> = read_json(input)?;
    let report = path_report(&p, &a.noise.model()?, a.steps.unwrap_or(64));
    sink.plot(&path_table(&p))?;
    sink.emit(&report, None)?;
    Ok(true)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct CycleArgs {
    /// JSON array of {"m", "sigma2"} nodes, first equal to last; `-` reads stdin.
    #[arg(long)]
    pub input: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
    /// Tolerance on the loop integrals of dH, dσ² and dΘ.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleOutput {
    pub closure: ClosureReport<f64>,
    pub global_efficiency: Option<GlobalEfficiency<f64>>,
    pub exact: bool,
}

pub fn cycle(a: &CycleArgs, sink: &Sink) -> Result<bool> {
    let input = a.input.as_deref().context("missing parameter `input` (flag --input)")?;
    let c = CyclePath::from_path(read_json::<ProcessPath<f64>>(input)?)?;
    let nm = a.noise.model()?;
    let closure = cycle_closure_check(&c, &nm);
    let exact = closure.exact(a.tol.unwrap_or(1e-9));
    let global_efficiency = global_efficiency_bound(&c, &nm).ok();
    let bound_ok = global_efficiency.is_none_or(|g| !g.sign_definite || g.holds);
    sink.plot(&path_table(c.path()))?;
    sink.emit(&CycleOutput { closure, global_efficiency, exact }, None)?;
    Ok(exact && bound_ok)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub m_a: Option<f64>,
    #[arg(long)]
    pub m_b: Option<f64>,
    /// Sampling-work budget W.
    #[arg(long)]
    pub work: Option<f64>,
    #[arg(long)]
    pub sigma_r2: Option<f64>,
    /// Trajectory rows.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Points per axis of the dynamic-programming cross-check; 0 skips it.
    #[arg(long)]
    pub dp_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpComparison {
    pub grid: usize,
    pub best_gain: f64,
    pub dp_gap: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub m_a: f64,
    pub m_b: f64,
    pub work: f64,
    pub sigma_r2: f64,
    pub coefficient: f64,
    pub peak_m: Option<f64>,
    pub gain: f64,
    pub max_info_bound: f64,
    pub dp: Option<DpComparison>,
    pub trajectory: Vec<TrajectorySample<f64>>,
}

pub const DP_TOL: f64 = 5e-3;

pub fn optimize(a: &OptimizeArgs, sink: &Sink) -> Result<bool> {
    let (m_a, m_b) = (required(a.m_a, "m_a")?, required(a.m_b, "m_b")?);
    let work = required(a.work, "work")?;
    let sigma_r2 = required(a.sigma_r2, "sigma_r2")?;
    let problem = BudgetProblem::new(m_a, m_b, work, NoiseModel::mutual_info(sigma_r2)?)?;
    let traj = solve_optimal(&problem)?;
    let gain = optimal_info_gain(&problem)?;
    let dp = match a.dp_grid.unwrap_or(64) {
        0 => None,
        n => {
            let sol = dp_oracle(&problem, &DpGrid::cube(n))?;
            let dp_gap = gain - sol.best_gain;
            Some(DpComparison {
                grid: n,
                best_gain: sol.best_gain,
                dp_gap,
                agrees: dp_gap.abs() <= DP_TOL && sol.best_gain <= gain + 1e-9,
            })
        }
    };
    let trajectory = traj.samples(a.nodes.unwrap_or(101));
    let mut table = Table::new(&["m", "sigma2_opt", "theta", "running_work", "running_gain"]);
    table.rows = trajectory
        .iter()
        .map(|s| vec![s.m, s.sigma2_opt, s.theta, s.running_work, s.running_gain])
        .collect();
    let out = OptimizeOutput {
        m_a,
        m_b,
        work,
        sigma_r2,
        coefficient: traj.coefficient,
        peak_m: traj.peak_m(),
        gain,
        max_info_bound: max_info_bound(m_a, m_b)?,
        dp: dp.clone(),
        trajectory,
    };
    sink.plot(&table)?;
    sink.emit(&out, Some(&table))?;
    Ok(dp.is_none_or(|d| d.agrees))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SecondLawArgs {
    /// Stimulus waveform, JSON array of {"t", "mu"} breakpoints; `-` reads stdin.
    #[arg(long, conflicts_with_all = ["trapezoid", "loop_input"])]
    pub waveform: Option<String>,
    /// Trapezoid `low,high,ramp,dwell` (default 1,3,1,10).
    #[arg(long)]
    pub trapezoid: Option<NumList>,
    /// Check a given (μ, m) loop, JSON array of {"mu", "m"}, instead of simulating.
    #[arg(long = "loop")]
    pub loop_input: Option<String>,
    /// Relaxation rate of the sampling dynamics.
    #[arg(long)]
    pub a: Option<f64>,
    /// Variance scale c in σ² = c μ^p.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub sigma_r2: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondLawOutput {
    pub verdict: SecondLawVerdict<f64>,
    pub green: GreenCheck<f64>,
    pub signed_area: f64,
    pub periods_simulated: Option<usize>,
    pub closure_gap: Option<f64>,
    #[serde(rename = "loop")]
    pub stimulus_loop: StimulusLoop<f64>,
}

pub fn second_law(a: &SecondLawArgs, sink: &Sink) -> Result<bool> {
    let law = ConstitutiveScaling::new(a.c.unwrap_or(1.0), a.p.unwrap_or(2.0))?;
    let nm = NoiseModel::mutual_info(a.sigma_r2.unwrap_or(1.0))?;
    let (lp, sim): (StimulusLoop<f64>, Option<DrivenCycle<f64>>) = match &a.loop_input {
        Some(src) => (read_json(src)?, None),
        None => {
            let wave = match (&a.waveform, &a.trapezoid) {
                (Some(src), _) => read_json::<Waveform<f64>>(src)?,
                (None, Some(NumList(v))) => {
                    let [low, high, ramp, dwell] = v[..] else {
                        bail!("--trapezoid takes four numbers: low,high,ramp,dwell");
                    };
                    Waveform::trapezoid(low, high, ramp, dwell)?
                }
                (None, None) => Waveform::trapezoid(1.0, 3.0, 1.0, 10.0)?,
            };
            let dynamics = SamplingDynamics::linear(a.a.unwrap_or(1.0), &law)?;
            let t_end = a.t_end.unwrap_or(wave.breakpoints()[0].t + 20.0 * wave.period());
            let c = simulate_driven_cycle(
                &wave,
                &dynamics,
                t_end,
                a.dt.unwrap_or(1e-3),
                a.max_nodes.unwrap_or(2000),
            )?;
            (c.stimulus_loop.clone(), Some(c))
        }
    };
    let verdict = second_law_check(&lp, &law, &nm)?;
    let green = green_check(&lp, &law, &nm);
    let mut table = Table::new(&["mu", "m"]);
    table.rows = lp.points().iter().map(|p| vec![p.mu, p.m]).collect();
    sink.plot(&table)?;
    sink.emit(
        &SecondLawOutput {
            verdict,
            green,
            signed_area: lp.signed_area(),
            periods_simulated: sim.as_ref().map(|c| c.periods_simulated),
            closure_gap: sim.as_ref().map(|c| c.closure_gap),
            stimulus_loop: lp,
        },
        None,
    )?;
    Ok(verdict.holds)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct AdaptArgs {
    /// JSON file with {"k", "beta", "p", "delta_i", "a"}; `-` reads stdin.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub delta_i: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Stimulus intensities, `a,b,c` or `start:stop:n`.
    #[arg(long)]
    pub stimulus: Option<NumList>,
    /// Times at which F(I, t) is tabulated.
    #[arg(long)]
    pub t_grid: Option<NumList>,
    /// CSV corpus with header unit_id,sr,pr,ss; `-` reads stdin.
    #[arg(long)]
    pub triples: Option<String>,
    /// Slack on both inequality bounds (spikes/s).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StimulusRow {
    pub i: f64,
    #[serde(flatten)]
    pub rates: FixedPoints<f64>,
    pub cycle_balance: f64,
    pub loop_balance: f64,
    /// F(I, t) on the time grid.
    pub response: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptOutput {
    pub params: Option<AdaptationParams<f64>>,
    pub t_grid: Vec<f64>,
    pub stimuli: Vec<StimulusRow>,
    pub triples_report: Option<TriplesReport<f64>>,
}

impl AdaptArgs {
    fn model(&self) -> Result<Option<AdaptationParams<f64>>> {
        if let Some(src) = &self.params {
            let mut p: AdaptationParams<f64> = read_json(src)?;
            // individual flags refine a parameter file
            p = AdaptationParams::new(
                self.k.unwrap_or(p.k),
                self.beta.unwrap_or(p.beta),
                self.p.unwrap_or(p.p),
                self.delta_i.unwrap_or(p.delta_i),
                self.a.unwrap_or(p.a),
            )?;
            return Ok(Some(p));
        }
        let given = [self.k, self.beta, self.p, self.delta_i, self.a];
        if given.iter().all(Option::is_none) {
            return Ok(None);
        }
        Ok(Some(AdaptationParams::new(
            required(self.k, "k")?,
            required(self.beta, "beta")?,
            required(self.p, "p")?,
            required(self.delta_i, "delta_i")?,
            self.a.unwrap_or(1.0),
        )?))
    }
}

pub fn adapt(a: &AdaptArgs, sink: &Sink) -> Result<bool> {
    let params = a.model()?;
    if params.is_none() && a.triples.is_none() {
        bail!("adapt needs model parameters (--params or --k/--beta/--p/--delta-i) and/or --triples");
    }
    let t_grid = a.t_grid.clone().map(|l| l.0).unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0, 5.0]);
    let mut ok = true;
    let mut stimuli = Vec::new();
    if let Some(p) = &params {
        let levels = a.stimulus.clone().map(|l| l.0).unwrap_or_else(|| vec![1.0]);
        for &i in &levels {
            let balance = cycle_balance(i, p)?;
            let line = loop_cycle_balance(i, p)?;
            ok &= balance >= -1e-12 && (balance - line).abs() <= 1e-3 * balance.abs().max(1e-12);
            stimuli.push(StimulusRow {
                i,
                rates: fixed_points(i, p)?,
                cycle_balance: balance,
                loop_balance: line,
                response: t_grid
                    .iter()
                    .map(|&t| infotherm::sensory::firing_rate(i, t, p))
                    .collect::<Result<_, _>>()?,
            });
        }
    }
    let triples_report = match &a.triples {
        Some(src) => {
            let ing = ingest_triples::<f64, _>(read_source(src)?)?;
            for e in &ing.rejected {
                eprintln!("{src}:{}: rejected row: {}", e.line, e.message);
            }
            let rep = verify_triples(&ing, a.tol.unwrap_or(1e-9));
            ok &= rep.all_pass();
            Some(rep)
        }
        None => None,
    };
    let mut headers = vec!["t".to_string()];
    headers.extend(stimuli.iter().map(|s| format!("F(I={})", s.i)));
    let table = Table {
        headers,
        rows: t_grid
            .iter()
            .enumerate()
            .map(|(j, &t)| std::iter::once(t).chain(stimuli.iter().map(|s| s.response[j])).collect())
            .collect(),
    };
    sink.plot(&table)?;
    let out = AdaptOutput { params, t_grid, stimuli, triples_report };
    sink.emit(&out, (!out.stimuli.is_empty() && out.triples_report.is_none()).then_some(&table))?;
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    NearestNeighbor,
    GaussianMoment,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long)]
    pub mean: Option<f64>,
    /// Observation variance (Gaussian family only).
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub sigma_r2: Option<f64>,
    #[arg(long)]
    pub raw_constant: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Root seed; falls back to $INFOTHERM_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// Neighbour order of the nearest-neighbour estimator.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also check Var(mean)·m/σ² over these m (at least three, ascending).
    #[arg(long)]
    pub scaling_m: Option<NumList>,
    /// Also run the skewness/kurtosis test on the ensemble.
    #[arg(long)]
    #[serde(default)]
    pub normality: bool,
    /// Write the simulated ensemble as CSV.
    #[arg(long)]
    pub dump_ensemble: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateOutput {
    pub spec: SamplingSpec,
    pub method: EntropyMethod,
    pub entropy: EntropyValidation,
    /// Raw differential entropy of the ensemble before removing the constant.
    pub ensemble_entropy: f64,
    pub normality: Option<NormalityReport>,
    pub variance_scaling: Option<VarianceScaling>,
}

pub fn validate(a: &ValidateArgs, sink: &Sink) -> Result<bool> {
    let family = match a.family.unwrap_or(FamilyName::Gaussian) {
        FamilyName::Gaussian => Family::Gaussian {
            mean: a.mean.unwrap_or(0.0),
            variance: a.variance.unwrap_or(1.0),
        },
        FamilyName::Poisson => {
            if a.variance.is_some() {
                bail!("poisson family: variance equals the mean; drop --variance");
            }
            Family::Poisson { mean: required(a.mean, "mean")? }
        }
    };
    let spec = SamplingSpec::new(
        family,
        a.m.unwrap_or(100),
        a.sigma_r2.unwrap_or(0.5),
        a.trials.unwrap_or(10_000),
        seed(a.seed)?,
    )?;
    let method = match a.method.unwrap_or(MethodName::NearestNeighbor) {
        MethodName::NearestNeighbor => EntropyMethod::NearestNeighbor { k: a.k.unwrap_or(10) },
        MethodName::GaussianMoment => EntropyMethod::GaussianMoment,
    };
    let convention = a.raw_constant.map_or(EntropyConstant::MutualInfo, EntropyConstant::Raw);
    let entropy = validate_entropy_formula(&spec, convention, method)?;
    let ensemble = simulate_estimator(&spec);
    let ensemble_entropy = estimate_entropy(&ensemble, method)?;
    if let Some(path) = &a.dump_ensemble {
        let f = std::fs::File::create(path).with_context(|| format!("creating {path}"))?;
        write_ensemble(&ensemble, std::io::BufWriter::new(f))?;
    }
    let normality = if a.normality { Some(normality_check(&ensemble)?) } else { None };
    let variance_scaling = match &a.scaling_m {
        Some(NumList(ms)) => {
            let ms: Vec<u64> = ms
                .iter()
                .map(|&x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as u64)
                    } else {
                        Err(anyhow::anyhow!("scaling_m entries must be positive integers, got {x}"))
                    }
                })
                .collect::<Result<_>>()?;
            Some(validate_variance_scaling(family, &ms, spec.trials, spec.seed)?)
        }
        None => None,
    };
    let ok = entropy.pass != Some(false)
        && normality.is_none_or(|n| n.pass)
        && variance_scaling.as_ref().is_none_or(|v| v.pass != Some(false));
    sink.emit(
        &ValidateOutput { spec, method, entropy, ensemble_entropy, normality, variance_scaling },
        None,
    )?;
    Ok(ok)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct CorpusArgs {
    /// Number of model-generated triples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Falls back to $INFOTHERM_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Writes a synthetic triple corpus as CSV to the output.
pub fn corpus(a: &CorpusArgs, sink: &Sink) -> Result<bool> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed(a.seed)?);
    let triples = synthetic_corpus::<f64, _>(&mut rng, a.n.unwrap_or(1000));
    match sink.output.as_deref() {
        Some(p) if p != "-" => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {p}"))?;
            write_triples(&triples, std::io::BufWriter::new(f))?;
        }
        _ => write_triples(&triples, std::io::stdout().lock())?,
    }
    Ok(true)
}

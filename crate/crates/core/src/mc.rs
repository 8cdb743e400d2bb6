//! Monte Carlo checks that repeated-sampling inference behaves as the
//! asymptotic formulas say. Double precision only.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{invalid, Error, Result};
use crate::state::{self, EntropyConstant, InferenceState, NoiseModel};

/// Observation distribution of a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian { mean: f64, variance: f64 },
    /// Variance equals the mean.
    Poisson { mean: f64 },
}

impl Family {
    pub fn mean(&self) -> f64 {
        match *self {
            Family::Gaussian { mean, .. } | Family::Poisson { mean } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Family::Gaussian { variance, .. } => variance,
            Family::Poisson { mean } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian { mean, variance } => {
                if !mean.is_finite() {
                    return Err(invalid("mean", mean, "must be finite"));
                }
                if !(variance >= 0.0) || !variance.is_finite() {
                    return Err(invalid("variance", variance, "must be finite and >= 0"));
                }
            }
            Family::Poisson { mean } => {
                if !(mean > 0.0) || !mean.is_finite() {
                    return Err(invalid("mean", mean, "poisson mean must be finite and > 0"));
                }
            }
        }
        Ok(())
    }
}

pub const MIN_TRIALS: usize = 100;

/// Everything needed to reproduce one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct SamplingSpec {
    pub family: Family,
    /// Observations per trial.
    pub m: u64,
    pub sigma_r2: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
struct RawSpec {
    family: Family,
    m: u64,
    sigma_r2: f64,
    trials: usize,
    seed: u64,
}

impl TryFrom<RawSpec> for SamplingSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        SamplingSpec::new(r.family, r.m, r.sigma_r2, r.trials, r.seed)
    }
}

impl SamplingSpec {
    pub fn new(family: Family, m: u64, sigma_r2: f64, trials: usize, seed: u64) -> Result<Self> {
        family.validate()?;
        if m == 0 {
            return Err(invalid("m", 0.0, "need at least one observation per trial"));
        }
        if !(sigma_r2 >= 0.0) || !sigma_r2.is_finite() {
            return Err(invalid("sigma_r2", sigma_r2, "must be finite and >= 0"));
        }
        if trials < MIN_TRIALS {
            return Err(invalid("trials", trials as f64, "need at least 100 trials"));
        }
        Ok(Self { family, m, sigma_r2, trials, seed })
    }

    /// Inference state `(m, σ²)` the ensemble should follow.
    pub fn state(&self) -> Result<InferenceState<f64>> {
        InferenceState::new(self.m as f64, self.family.variance())
    }

    /// Large-sample regime in which pass/fail verdicts are issued.
    pub fn asymptotic(&self) -> bool {
        self.m >= 100 && self.trials >= 10_000
    }
}

/// RNG for one trial: the root seed keys the generator and the trial index
/// selects an independent stream, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Sample mean of `m` draws plus representation noise, once per trial.
pub fn simulate_estimator(spec: &SamplingSpec) -> Vec<f64> {
    let noise = (spec.sigma_r2 > 0.0)
        .then(|| Normal::new(0.0, spec.sigma_r2.sqrt()).expect("finite sd"));
    let m = spec.m;
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(spec.seed, trial);
            let sum: f64 = match spec.family {
                Family::Gaussian { mean, variance } => {
                    let d = Normal::new(mean, variance.sqrt()).expect("finite sd");
                    (0..m).map(|_| d.sample(&mut rng)).sum()
                }
                Family::Poisson { mean } => {
                    let d = Poisson::new(mean).expect("positive mean");
                    (0..m).map(|_| d.sample(&mut rng)).sum()
                }
            };
            let est = sum / m as f64;
            match &noise {
                Some(n) => est + n.sample(&mut rng),
                None => est,
            }
        })
        .collect()
}

/// Writes `trial,estimate` rows.
pub fn write_ensemble<W: Write>(ensemble: &[f64], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["trial", "estimate"]).map_err(csv_err)?;
    for (i, x) in ensemble.iter().enumerate() {
        w.write_record([i.to_string(), x.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Mean and unbiased variance.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EntropyMethod {
    /// `½ log(2πe s²)`; exact only for Gaussian data.
    GaussianMoment,
    /// Kozachenko–Leonenko estimate from `k`-th neighbour distances.
    NearestNeighbor { k: usize },
}

impl Default for EntropyMethod {
    fn default() -> Self {
        EntropyMethod::NearestNeighbor { k: 1 }
    }
}

/// Neighbour order used by the validation routines; lower variance than the
/// first-neighbour estimator at the same sample size.
pub const VALIDATION_METHOD: EntropyMethod = EntropyMethod::NearestNeighbor { k: 10 };

/// Differential entropy (nats) of a one-dimensional ensemble.
pub fn estimate_entropy(ensemble: &[f64], method: EntropyMethod) -> Result<f64> {
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(Error::DegenerateEnsemble("fewer than three distinct values"));
    }
    if ensemble.len() < MIN_TRIALS {
        return Err(Error::InsufficientData { needed: MIN_TRIALS, got: ensemble.len() });
    }
    if ensemble.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateEnsemble("non-finite value"));
    }
    match method {
        EntropyMethod::GaussianMoment => {
            let (_, var) = mean_variance(ensemble);
            Ok(0.5 * (std::f64::consts::TAU * std::f64::consts::E * var).ln())
        }
        EntropyMethod::NearestNeighbor { k } => nearest_neighbor_entropy(ensemble, k),
    }
}

fn nearest_neighbor_entropy(ensemble: &[f64], k: usize) -> Result<f64> {
    let n = ensemble.len();
    if k == 0 || k >= n {
        return Err(invalid("k", k as f64, "need 1 <= k < ensemble size"));
    }
    let mut xs = ensemble.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut sum_log = 0.0;
    for i in 0..n {
        // merge outwards from i until k neighbours are taken
        let (mut lo, mut hi) = (i, i);
        let mut eps = 0.0;
        for _ in 0..k {
            let left = (lo > 0).then(|| xs[i] - xs[lo - 1]);
            let right = (hi + 1 < n).then(|| xs[hi + 1] - xs[i]);
            eps = match (left, right) {
                (Some(l), Some(r)) if l <= r => {
                    lo -= 1;
                    l
                }
                (Some(l), None) => {
                    lo -= 1;
                    l
                }
                (_, Some(r)) => {
                    hi += 1;
                    r
                }
                (None, None) => unreachable!("k < n"),
            };
        }
        if eps <= 0.0 {
            return Err(Error::DegenerateEnsemble("tied values give zero neighbour distance"));
        }
        sum_log += eps.ln();
    }
    Ok(digamma(n as f64) - digamma(k as f64) + std::f64::consts::LN_2 + sum_log / n as f64)
}

/// Entropy of the ensemble versus the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValidation {
    pub h_empirical: f64,
    pub h_formula: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub asymptotic: bool,
    /// `None` outside the large-sample regime (diagnostic only).
    pub pass: Option<bool>,
}

pub fn entropy_tolerance(family: &Family) -> f64 {
    match family {
        Family::Gaussian { .. } => 0.02,
        Family::Poisson { .. } => 0.03,
    }
}

/// Simulates `spec`, estimates the differential entropy and removes the
/// convention constant: for mutual information the entropy of the
/// representation noise alone, for a raw constant `c` the Gaussian
/// normalisation `½ log 2πe` (then adds `c`).
pub fn validate_entropy_formula(
    spec: &SamplingSpec,
    convention: EntropyConstant<f64>,
    method: EntropyMethod,
) -> Result<EntropyValidation> {
    if spec.sigma_r2 == 0.0 && !matches!(spec.family, Family::Gaussian { .. }) {
        return Err(Error::PreconditionViolation(
            "non-Gaussian families need sigma_r2 > 0 for a differential entropy".into(),
        ));
    }
    let noise = NoiseModel::new(spec.sigma_r2, convention)?;
    let h_formula = state::entropy(&spec.state()?, &noise)?;
    let h_raw = estimate_entropy(&simulate_estimator(spec), method)?;
    let two_pi_e = std::f64::consts::TAU * std::f64::consts::E;
    let h_empirical = match convention {
        EntropyConstant::MutualInfo => h_raw - 0.5 * (two_pi_e * spec.sigma_r2).ln(),
        EntropyConstant::Raw(c) => h_raw - 0.5 * two_pi_e.ln() + c,
    };
    let gap = (h_empirical - h_formula).abs();
    let tolerance = entropy_tolerance(&spec.family);
    let asymptotic = spec.asymptotic();
    Ok(EntropyValidation {
        h_empirical,
        h_formula,
        gap,
        tolerance,
        asymptotic,
        pass: asymptotic.then_some(gap <= tolerance),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m: u64,
    pub variance: f64,
    /// `Var(mean)·m/σ²`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScaling {
    pub rows: Vec<ScalingRow>,
    pub pass: Option<bool>,
}

/// Checks `Var(mean) = σ²/m` over ascending `m_list`, one seeded ensemble
/// per `m` with no representation noise.
pub fn validate_variance_scaling(
    family: Family,
    m_list: &[u64],
    trials: usize,
    seed: u64,
) -> Result<VarianceScaling> {
    if m_list.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: m_list.len() });
    }
    if m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::PreconditionViolation("m_list must be strictly ascending".into()));
    }
    let sigma2 = family.variance();
    if !(sigma2 > 0.0) {
        return Err(invalid("variance", sigma2, "scaling check needs sigma^2 > 0"));
    }
    let mut rows = Vec::with_capacity(m_list.len());
    for (j, &m) in m_list.iter().enumerate() {
        let sub_seed = seed.wrapping_add((j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let spec = SamplingSpec::new(family, m, 0.0, trials, sub_seed)?;
        let (_, variance) = mean_variance(&simulate_estimator(&spec));
        rows.push(ScalingRow { m, variance, ratio: variance * m as f64 / sigma2 });
    }
    let pass = (trials >= 10_000).then(|| rows.iter().all(|r| (0.9..=1.1).contains(&r.ratio)));
    Ok(VarianceScaling { rows, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub pass: bool,
}

pub const NORMALITY_MIN_SIZE: usize = 10_000;

/// Moment test: `|skewness| < 0.05` and `|excess kurtosis| < 0.1`.
pub fn normality_check(ensemble: &[f64]) -> Result<NormalityReport> {
    if ensemble.len() < NORMALITY_MIN_SIZE {
        return Err(Error::InsufficientData { needed: NORMALITY_MIN_SIZE, got: ensemble.len() });
    }
    let n = ensemble.len() as f64;
    let mean = ensemble.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in ensemble {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == 0.0 {
        return Err(Error::DegenerateEnsemble("zero variance"));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    Ok(NormalityReport {
        skewness,
        excess_kurtosis,
        pass: skewness.abs() < 0.05 && excess_kurtosis.abs() < 0.1,
    })
}

/// Empirical error of the linear (posterior-mean) estimator of a Gaussian
/// signal of variance `signal` observed through noise of variance `noise`.
/// Converges to `signal·noise/(signal + noise)`.
pub fn gaussian_channel_mmse(signal: f64, noise: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(signal >= 0.0) || !(noise > 0.0) {
        return Err(invalid("variance", signal.min(noise), "need signal >= 0 and noise > 0"));
    }
    if trials < MIN_TRIALS {
        return Err(invalid("trials", trials as f64, "need at least 100 trials"));
    }
    let gain = signal / (signal + noise);
    let (sd_s, sd_n) = (signal.sqrt(), noise.sqrt());
    let sq: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let e: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let x = sd_s * z;
            let y = x + sd_n * e;
            (gain * y - x).powi(2)
        })
        .collect();
    Ok(sq.iter().sum::<f64>() / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(mean: f64, variance: f64) -> Family {
        Family::Gaussian { mean, variance }
    }

    #[test]
    fn spec_validation() {
        assert!(SamplingSpec::new(gauss(0.0, 1.0), 10, 0.0, 99, 1).is_err());
        assert!(SamplingSpec::new(gauss(0.0, 1.0), 0, 0.0, 100, 1).is_err());
        assert!(SamplingSpec::new(Family::Poisson { mean: 0.0 }, 10, 0.0, 100, 1).is_err());
        let json = r#"{"family":{"family":"poisson","mean":4.0},"m":400,"sigma_r2":0.0,"trials":50,"seed":1}"#;
        assert!(serde_json::from_str::<SamplingSpec>(json).is_err());
    }

    #[test]
    fn ensemble_variances() {
        let s = SamplingSpec::new(gauss(0.0, 1.0), 100, 0.0, 100_000, 11).unwrap();
        let (_, v) = mean_variance(&simulate_estimator(&s));
        assert!((v / 0.01 - 1.0).abs() < 0.03, "{v}");
        let s = SamplingSpec::new(gauss(3.0, 0.0), 5, 1.0, 100_000, 12).unwrap();
        let (_, v) = mean_variance(&simulate_estimator(&s));
        assert!((v - 1.0).abs() < 0.03, "{v}");
        let s = SamplingSpec::new(Family::Poisson { mean: 4.0 }, 400, 0.0, 20_000, 13).unwrap();
        let (mean, v) = mean_variance(&simulate_estimator(&s));
        assert!((v / 0.01 - 1.0).abs() < 0.05, "{v}");
        assert!((mean - 4.0).abs() < 0.01);
    }

    #[test]
    fn ensembles_are_reproducible_across_pools() {
        let s = SamplingSpec::new(Family::Poisson { mean: 2.5 }, 30, 0.3, 2_000, 99).unwrap();
        let a = simulate_estimator(&s);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_estimator(&s));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(7).build().unwrap();
        let c = pool.install(|| simulate_estimator(&s));
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(b, c);
        let other = SamplingSpec { seed: 100, ..s };
        assert_ne!(a, simulate_estimator(&other));
    }

    #[test]
    fn entropy_of_standard_normal() {
        let s = SamplingSpec::new(gauss(0.0, 1.0), 1, 0.0, 100_000, 3).unwrap();
        let xs = simulate_estimator(&s);
        let exact = 0.5 * (std::f64::consts::TAU * std::f64::consts::E).ln();
        let nn1 = estimate_entropy(&xs, EntropyMethod::default()).unwrap();
        let nn10 = estimate_entropy(&xs, VALIDATION_METHOD).unwrap();
        let gm = estimate_entropy(&xs, EntropyMethod::GaussianMoment).unwrap();
        for h in [nn1, nn10, gm] {
            assert!((h - exact).abs() < 0.02, "{h}");
        }
        assert!((nn1 - gm).abs() < 0.03);
    }

    #[test]
    fn degenerate_ensembles() {
        let two: Vec<f64> = (0..200).map(|i| (i % 2) as f64).collect();
        for m in [EntropyMethod::GaussianMoment, EntropyMethod::default()] {
            assert!(matches!(estimate_entropy(&two, m), Err(Error::DegenerateEnsemble(_))));
            assert!(matches!(estimate_entropy(&[1.0; 500], m), Err(Error::DegenerateEnsemble(_))));
        }
        let short: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(matches!(
            estimate_entropy(&short, EntropyMethod::GaussianMoment),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn entropy_formula_gaussian_mutual_info() {
        let s = SamplingSpec::new(gauss(0.0, 2.0), 100, 0.5, 100_000, 2024).unwrap();
        let v = validate_entropy_formula(&s, EntropyConstant::MutualInfo, VALIDATION_METHOD).unwrap();
        assert!(v.gap <= 0.01, "{v:?}");
        assert_eq!(v.pass, Some(true));
    }

    #[test]
    fn entropy_formula_raw_and_diagnostic() {
        let s = SamplingSpec::new(gauss(1.0, 3.0), 100, 0.0, 10_000, 7).unwrap();
        let v = validate_entropy_formula(&s, EntropyConstant::Raw(0.25), VALIDATION_METHOD).unwrap();
        assert_eq!(v.pass, Some(true), "{v:?}");
        let s = SamplingSpec::new(Family::Poisson { mean: 10.0 }, 2, 0.1, 10_000, 8).unwrap();
        let v = validate_entropy_formula(&s, EntropyConstant::MutualInfo, VALIDATION_METHOD).unwrap();
        assert!(!v.asymptotic && v.pass.is_none() && v.gap.is_finite());
        let s = SamplingSpec::new(Family::Poisson { mean: 10.0 }, 400, 0.0, 10_000, 8).unwrap();
        assert!(validate_entropy_formula(&s, EntropyConstant::Raw(0.0), VALIDATION_METHOD).is_err());
    }

    #[test]
    fn variance_scaling_errors() {
        assert!(matches!(
            validate_variance_scaling(gauss(0.0, 1.0), &[10], 1000, 1),
            Err(Error::InsufficientData { needed: 3, got: 1 })
        ));
        assert!(validate_variance_scaling(gauss(0.0, 1.0), &[10, 5, 20], 1000, 1).is_err());
        let r = validate_variance_scaling(gauss(0.0, 1.0), &[1, 2, 4], 1000, 1).unwrap();
        assert!(r.pass.is_none());
    }

    #[test]
    fn normality() {
        let g = SamplingSpec::new(gauss(0.0, 1.0), 1, 0.0, 100_000, 21).unwrap();
        assert!(normality_check(&simulate_estimator(&g)).unwrap().pass);
        let p = SamplingSpec::new(Family::Poisson { mean: 4.0 }, 400, 0.0, 100_000, 22).unwrap();
        assert!(normality_check(&simulate_estimator(&p)).unwrap().pass);
        let skewed = SamplingSpec::new(Family::Poisson { mean: 0.5 }, 2, 0.0, 100_000, 23).unwrap();
        let r = normality_check(&simulate_estimator(&skewed)).unwrap();
        assert!(!r.pass && r.skewness > 0.5);
        assert!(normality_check(&[0.0; 10]).is_err());
    }

    #[test]
    fn channel_mmse_matches_closed_form() {
        let st = InferenceState::new(4.0, 8.0).unwrap();
        let noise = NoiseModel::mutual_info(1.5).unwrap();
        let exact = state::mmse(&st, &noise).unwrap();
        let emp = gaussian_channel_mmse(2.0, 1.5, 200_000, 5).unwrap();
        assert!((emp / exact - 1.0).abs() < 0.01, "{emp} vs {exact}");
    }

    #[test]
    fn ensemble_csv() {
        let mut buf = Vec::new();
        write_ensemble(&[1.5, -2.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trial,estimate\n0,1.5\n1,-2\n");
    }
}

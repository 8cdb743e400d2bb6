//! Ideal sensory unit: adaptation response `F(I, t)`, the fixed-point rates
//! SR/PR/SS/TR, the universal adaptation inequality and corpus verification.

use std::io::Read;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle_laws::{cyclic_information, step_cycle_loop, ConstitutiveScaling, StimulusLoop};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::state::NoiseModel;

/// Parameters of the adaptation model; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound(deserialize = "T: Scalar"))]
pub struct AdaptationParams<T> {
    /// Firing-rate scale (spikes/s per nat).
    pub k: T,
    pub beta: T,
    pub p: T,
    /// Background intensity.
    pub delta_i: T,
    /// Relaxation rate (1/s).
    pub a: T,
}

#[derive(Deserialize)]
struct RawParams<T> {
    k: T,
    beta: T,
    p: T,
    delta_i: T,
    a: T,
}

impl<T: Scalar> TryFrom<RawParams<T>> for AdaptationParams<T> {
    type Error = Error;
    fn try_from(r: RawParams<T>) -> Result<Self> {
        Self::new(r.k, r.beta, r.p, r.delta_i, r.a)
    }
}

impl<T: Scalar> AdaptationParams<T> {
    pub fn new(k: T, beta: T, p: T, delta_i: T, a: T) -> Result<Self> {
        for (name, v) in [("k", k), ("beta", beta), ("p", p), ("delta_i", delta_i), ("a", a)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(name, v.as_f64(), "must be finite and > 0"));
            }
        }
        Ok(Self { k, beta, p, delta_i, a })
    }

    /// Variance law `σ²(μ) = β μ^p` of the underlying inference problem.
    pub fn scaling(&self) -> ConstitutiveScaling<T> {
        ConstitutiveScaling::new(self.beta, self.p).expect("validated parameters")
    }

    /// `m_eq = μ^{p/2}` at total intensity `μ`.
    pub fn m_eq(&self, mu: T) -> T {
        mu.powf(self.p * T::half())
    }

    // (k/2) ln(1 + x)
    fn rate(&self, x: T) -> T {
        self.k * T::half() * x.ln_1p()
    }
}

fn check_stimulus<T: Scalar>(i: T) -> Result<()> {
    if !(i >= T::zero()) || !i.is_finite() {
        return Err(invalid("stimulus", i.as_f64(), "must be finite and >= 0"));
    }
    Ok(())
}

/// `m(t) = δI^{p/2} e^{−at} + (I + δI)^{p/2}(1 − e^{−at})`; `t = ∞` allowed.
pub fn m_of_t<T: Scalar>(t: T, i: T, params: &AdaptationParams<T>) -> Result<T> {
    check_stimulus(i)?;
    if !(t >= T::zero()) {
        return Err(invalid("t", t.as_f64(), "must be >= 0"));
    }
    let decay = (-params.a * t).exp();
    let rise = -(-params.a * t).exp_m1();
    Ok(params.m_eq(params.delta_i) * decay + params.m_eq(i + params.delta_i) * rise)
}

/// `F(I, t) = (k/2) log(1 + β(I + δI)^p / m(t))`.
pub fn firing_rate<T: Scalar>(i: T, t: T, params: &AdaptationParams<T>) -> Result<T> {
    let m = m_of_t(t, i, params)?;
    let mu = i + params.delta_i;
    Ok(params.rate(params.beta * mu.powf(params.p) / m))
}

/// Spontaneous, peak, steady-state and trough rates (spikes/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints<T> {
    pub sr: T,
    pub pr: T,
    pub ss: T,
    pub tr: T,
}

/// The trough is the offset response: stimulus back at `δI` while `m` is
/// still at `m_eq(I)`.
pub fn fixed_points<T: Scalar>(i: T, params: &AdaptationParams<T>) -> Result<FixedPoints<T>> {
    check_stimulus(i)?;
    let b = params.beta;
    let half_p = params.p * T::half();
    let d = params.delta_i;
    let mu = i + d;
    Ok(FixedPoints {
        sr: params.rate(b * d.powf(half_p)),
        pr: params.rate(b * mu.powf(params.p) / d.powf(half_p)),
        ss: params.rate(b * mu.powf(half_p)),
        tr: params.rate(b * d.powf(params.p) / mu.powf(half_p)),
    })
}

/// `(PR − SS) + (TR − SR)`.
pub fn cycle_balance<T: Scalar>(i: T, params: &AdaptationParams<T>) -> Result<T> {
    let f = fixed_points(i, params)?;
    Ok((f.pr - f.ss) + (f.tr - f.sr))
}

/// Rest → stimulus → rest loop in `(μ, m)` traced by an ideal on/off step.
pub fn adaptation_loop<T: Scalar>(i: T, params: &AdaptationParams<T>) -> Result<StimulusLoop<T>> {
    check_stimulus(i)?;
    let d = params.delta_i;
    step_cycle_loop(d, i + d, params.m_eq(d), params.m_eq(i + d))
}

/// `k ∮ dI` over [`adaptation_loop`], the line-integral route to
/// [`cycle_balance`].
pub fn loop_cycle_balance<T: Scalar>(i: T, params: &AdaptationParams<T>) -> Result<T> {
    let lp = adaptation_loop(i, params)?;
    let noise = NoiseModel::mutual_info(T::one())?;
    Ok(params.k * cyclic_information(&lp, &params.scaling(), &noise))
}

/// `F(I, t)` on a grid; rows follow `i_values`, columns `t_values`.
pub fn response_grid<T: Scalar>(
    i_values: &[T],
    t_values: &[T],
    params: &AdaptationParams<T>,
) -> Result<Vec<Vec<T>>> {
    i_values
        .iter()
        .map(|&i| t_values.iter().map(|&t| firing_rate(i, t, params)).collect())
        .collect()
}

/// One measured (or generated) adaptation triple, rates in spikes/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AdaptationTriple<T> {
    pub unit_id: String,
    pub sr: T,
    pub pr: T,
    pub ss: T,
}

impl<T: Scalar> AdaptationTriple<T> {
    pub fn new(unit_id: impl Into<String>, sr: T, pr: T, ss: T) -> Result<Self> {
        for (name, v) in [("sr", sr), ("pr", pr), ("ss", ss)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(name, v.as_f64(), "rate must be finite and >= 0"));
            }
        }
        if pr < sr {
            return Err(invalid("pr", pr.as_f64(), "peak rate below spontaneous rate"));
        }
        Ok(Self { unit_id: unit_id.into(), sr, pr, ss })
    }

    pub fn from_fixed_points(unit_id: impl Into<String>, f: &FixedPoints<T>) -> Self {
        Self { unit_id: unit_id.into(), sr: f.sr, pr: f.pr, ss: f.ss }
    }
}

/// Outcome of `√(PR·SR) ≤ SS ≤ (PR + SR)/2` for one triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict<T> {
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `SS − √(PR·SR)`.
    pub margin_lo: T,
    /// `(PR + SR)/2 − SS`.
    pub margin_hi: T,
}

impl<T> InequalityVerdict<T> {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub fn universal_inequality_check<T: Scalar>(
    triple: &AdaptationTriple<T>,
    tol: T,
) -> InequalityVerdict<T> {
    let margin_lo = triple.ss - (triple.pr * triple.sr).sqrt();
    let margin_hi = (triple.pr + triple.sr) * T::half() - triple.ss;
    InequalityVerdict {
        lower_ok: margin_lo >= -tol,
        upper_ok: margin_hi >= -tol,
        margin_lo,
        margin_hi,
    }
}

/// Row that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub message: String,
}

/// Parsed triples plus the rows that were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub triples: Vec<AdaptationTriple<T>>,
    pub rejected: Vec<RowError>,
}

/// Reads `unit_id,sr,pr,ss` records. Bad rows are collected with their line
/// numbers and skipped; a source with no data rows is an error.
pub fn ingest_triples<T: Scalar, R: Read>(source: R) -> Result<Ingested<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    for want in ["unit_id", "sr", "pr", "ss"] {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Csv(format!("missing column `{want}`")));
        }
    }
    let mut triples = Vec::new();
    let mut rejected = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                rejected.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let row: std::result::Result<AdaptationTriple<f64>, _> = rec.deserialize(Some(&headers));
        let checked = row
            .map_err(|e| e.to_string())
            .and_then(|r| {
                AdaptationTriple::new(r.unit_id, T::of(r.sr), T::of(r.pr), T::of(r.ss))
                    .map_err(|e| e.to_string())
            });
        match checked {
            Ok(t) => triples.push(t),
            Err(message) => rejected.push(RowError { line, message }),
        }
    }
    if triples.is_empty() && rejected.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Ingested { triples, rejected })
}

/// Writes triples as `unit_id,sr,pr,ss` CSV.
pub fn write_triples<T: Scalar, W: std::io::Write>(
    triples: &[AdaptationTriple<T>],
    sink: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for t in triples {
        w.serialize(t).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Least-squares fit of `log SS` on `log PR`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Pearson correlation of the log-log points.
    pub r: T,
    pub n: usize,
}

pub fn loglog_slope<T: Scalar>(triples: &[AdaptationTriple<T>]) -> Result<SlopeFit<T>> {
    if triples.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: triples.len() });
    }
    let mut pts = Vec::with_capacity(triples.len());
    for t in triples {
        if !(t.pr > T::zero()) || !(t.ss > T::zero()) {
            return Err(Error::PreconditionViolation(format!(
                "unit {}: log-log fit needs pr, ss > 0",
                t.unit_id
            )));
        }
        pts.push((t.pr.ln(), t.ss.ln()));
    }
    let n = T::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > T::epsilon() * T::epsilon() * n * (T::one() + mx * mx)) {
        return Err(Error::InsufficientVariation);
    }
    let slope = sxy / sxx;
    let r = if syy > T::zero() { sxy / (sxx * syy).sqrt() } else { T::zero() };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r, n: pts.len() })
}

/// Smallest margins seen and the units they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstMargins<T> {
    pub lower: T,
    pub lower_unit: String,
    pub upper: T,
    pub upper_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowVerdict<T> {
    pub unit_id: String,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub margin_lo: T,
    pub margin_hi: T,
}

/// Aggregate verification of a triple corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct TriplesReport<T> {
    pub n_rows: usize,
    pub n_pass_lower: usize,
    pub n_pass_upper: usize,
    pub worst_margins: Option<WorstMargins<T>>,
    pub slope_fit: Option<SlopeFit<T>>,
    pub rows: Vec<RowVerdict<T>>,
    pub rejected: Vec<RowError>,
}

impl<T> TriplesReport<T> {
    pub fn fraction_lower(&self) -> f64 {
        self.n_pass_lower as f64 / self.n_rows.max(1) as f64
    }

    pub fn fraction_upper(&self) -> f64 {
        self.n_pass_upper as f64 / self.n_rows.max(1) as f64
    }

    /// Every accepted row satisfies both bounds and none was rejected.
    pub fn all_pass(&self) -> bool {
        self.n_rows > 0
            && self.n_pass_lower == self.n_rows
            && self.n_pass_upper == self.n_rows
            && self.rejected.is_empty()
    }
}

pub fn verify_triples<T: Scalar>(ingested: &Ingested<T>, tol: T) -> TriplesReport<T> {
    let rows: Vec<RowVerdict<T>> = ingested
        .triples
        .par_iter()
        .map(|t| {
            let v = universal_inequality_check(t, tol);
            RowVerdict {
                unit_id: t.unit_id.clone(),
                lower_ok: v.lower_ok,
                upper_ok: v.upper_ok,
                margin_lo: v.margin_lo,
                margin_hi: v.margin_hi,
            }
        })
        .collect();
    let worst_margins = rows.iter().fold(None::<WorstMargins<T>>, |acc, r| {
        let mut w = acc.unwrap_or(WorstMargins {
            lower: T::infinity(),
            lower_unit: String::new(),
            upper: T::infinity(),
            upper_unit: String::new(),
        });
        if r.margin_lo < w.lower {
            w.lower = r.margin_lo;
            w.lower_unit = r.unit_id.clone();
        }
        if r.margin_hi < w.upper {
            w.upper = r.margin_hi;
            w.upper_unit = r.unit_id.clone();
        }
        Some(w)
    });
    TriplesReport {
        n_rows: rows.len(),
        n_pass_lower: rows.iter().filter(|r| r.lower_ok).count(),
        n_pass_upper: rows.iter().filter(|r| r.upper_ok).count(),
        worst_margins,
        slope_fit: loglog_slope(&ingested.triples).ok(),
        rows,
        rejected: ingested.rejected.clone(),
    }
}

/// Random parameters from broad positive ranges.
pub fn random_params<T: Scalar, R: Rng>(rng: &mut R) -> AdaptationParams<T> {
    let mut log_uniform = |lo: f64, hi: f64| T::of((rng.random_range(lo.ln()..hi.ln())).exp());
    AdaptationParams::new(
        log_uniform(0.1, 100.0),
        log_uniform(1e-2, 1e2),
        log_uniform(0.2, 4.0),
        log_uniform(1e-2, 1e2),
        log_uniform(0.1, 10.0),
    )
    .expect("positive draws")
}

/// Model-generated triples over random parameters and stimuli.
pub fn synthetic_corpus<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<AdaptationTriple<T>> {
    (0..n)
        .map(|j| {
            let params = random_params::<T, _>(rng);
            let i = params.delta_i * T::of((rng.random_range(-3.0f64..3.0) * std::f64::consts::LN_10).exp());
            let f = fixed_points(i, &params).expect("finite stimulus");
            AdaptationTriple::from_fixed_points(format!("unit{j:05}"), &f)
        })
        .collect()
}

/// Triples from a stimulus sweep at fixed parameters.
pub fn sweep_corpus<T: Scalar>(params: &AdaptationParams<T>, i_values: &[T]) -> Result<Vec<AdaptationTriple<T>>> {
    i_values
        .iter()
        .enumerate()
        .map(|(j, &i)| Ok(AdaptationTriple::from_fixed_points(format!("sweep{j:03}"), &fixed_points(i, params)?)))
        .collect()
}

/// Triples on the exact power law `SS = √(PR·SR₀)`.
pub fn power_law_corpus<T: Scalar>(sr0: T, pr_values: &[T]) -> Vec<AdaptationTriple<T>> {
    pr_values
        .iter()
        .enumerate()
        .map(|(j, &pr)| AdaptationTriple {
            unit_id: format!("pl{j:03}"),
            sr: sr0,
            pr,
            ss: (pr * sr0).sqrt(),
        })
        .collect()
}

/// `n` log-spaced values on `[lo, hi]`.
pub fn geomspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|j| (a + (b - a) * T::of_usize(j) / T::of_usize(n - 1)).exp())
        .collect()
}

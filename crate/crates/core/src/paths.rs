//! Piecewise-linear trajectories in `(m, σ²)` and their line integrals.
//!
//! Every integral is evaluated segment by segment with adaptive
//! Gauss–Kronrod quadrature along the linear parametrization
//! `(m, σ²)(t) = a + t (b − a)`, `t ∈ [0, 1]`.

pub mod generate;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{self, Orientation};
use crate::quadrature::integrate;
use crate::scalar::Scalar;
use crate::state::{self, information_density, InferenceState, NoiseModel};

/// Vertex of a path. Serializes as `{"m": .., "sigma2": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathNode<T> {
    pub m: T,
    pub sigma2: T,
}

impl<T: Scalar> PathNode<T> {
    pub fn new(m: T, sigma2: T) -> Result<Self> {
        InferenceState::new(m, sigma2).map(Self::from)
    }

    pub fn state(&self) -> InferenceState<T> {
        InferenceState::new(self.m, self.sigma2).expect("validated node")
    }

    fn validate(&self) -> Result<()> {
        InferenceState::new(self.m, self.sigma2).map(|_| ())
    }
}

impl<T: Scalar> From<InferenceState<T>> for PathNode<T> {
    fn from(s: InferenceState<T>) -> Self {
        Self {
            m: s.m(),
            sigma2: s.sigma2(),
        }
    }
}

/// Ordered nodes, linearly interpolated. At least two nodes, consecutive
/// nodes distinct.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProcessPath<T> {
    nodes: Vec<PathNode<T>>,
}

impl<'de, T: Scalar> Deserialize<'de> for ProcessPath<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nodes = Vec::<PathNode<T>>::deserialize(d)?;
        ProcessPath::new(nodes).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> ProcessPath<T> {
    pub fn new(nodes: Vec<PathNode<T>>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        for (i, n) in nodes.iter().enumerate() {
            n.validate()
                .map_err(|e| Error::InvalidPath(format!("node {i}: {e}")))?;
        }
        if let Some(i) = nodes.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath(format!(
                "nodes {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Self { nodes })
    }

    /// Builds a path from `(m, σ²)` pairs.
    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(m, sigma2)| PathNode { m, sigma2 })
                .collect(),
        )
    }

    pub fn nodes(&self) -> &[PathNode<T>] {
        &self.nodes
    }

    pub fn start(&self) -> PathNode<T> {
        self.nodes[0]
    }

    pub fn end(&self) -> PathNode<T> {
        *self.nodes.last().expect("non-empty")
    }

    pub fn segments(&self) -> impl Iterator<Item = (PathNode<T>, PathNode<T>)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    /// The same path traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self { nodes }
    }

    /// True when `m` never decreases along the path.
    pub fn is_monotone_in_m(&self) -> bool {
        self.segments().all(|(a, b)| b.m >= a.m)
    }

    fn integrate_segments<F>(&self, integrand: F) -> T
    where
        F: Fn(T, T, T, T) -> T,
    {
        let tol = T::of(T::QUAD_TOL);
        self.segments()
            .map(|(a, b)| segment_integral(a, b, &integrand, tol))
            .sum()
    }
}

/// `∫₀¹ f(m(t), σ²(t), dm, dσ²) dt` along a straight segment.
fn segment_integral<T: Scalar, F>(a: PathNode<T>, b: PathNode<T>, f: &F, tol: T) -> T
where
    F: Fn(T, T, T, T) -> T,
{
    let dm = b.m - a.m;
    let ds = b.sigma2 - a.sigma2;
    integrate(
        |t: T| {
            let m = a.m + t * dm;
            // Clamp rounding below zero on segments that end on the σ² = 0 axis.
            let s2 = (a.sigma2 + t * ds).max(T::zero());
            f(m, s2, dm, ds)
        },
        T::zero(),
        T::one(),
        tol,
    )
}

/// Sampling work `∫ (σ²/m) dm`.
pub fn sampling_work<T: Scalar>(path: &ProcessPath<T>) -> T {
    path.integrate_segments(|m, s2, dm, _| {
        if dm == T::zero() {
            T::zero()
        } else {
            s2 / m * dm
        }
    })
}

/// Information gained by sampling, `−∫ (∂H/∂m) dm = ∫ σ²/(mΘ) dm`.
pub fn information_gain<T: Scalar>(path: &ProcessPath<T>, noise: &NoiseModel<T>) -> T {
    let r = noise.sigma_r2();
    path.integrate_segments(|m, s2, dm, _| {
        if dm == T::zero() {
            T::zero()
        } else {
            information_density(m, s2, r) * dm
        }
    })
}

/// Clausius-like reversible entropy flux `∫ dσ²/Θ`.
pub fn reversible_entropy_flux<T: Scalar>(path: &ProcessPath<T>, noise: &NoiseModel<T>) -> T {
    let r = noise.sigma_r2();
    path.integrate_segments(|m, s2, _, ds| {
        if ds == T::zero() {
            T::zero()
        } else {
            ds / (T::two() * (s2 + m * r))
        }
    })
}

/// `∫ dH` by quadrature of the exact differential (flux minus information).
pub fn entropy_change<T: Scalar>(path: &ProcessPath<T>, noise: &NoiseModel<T>) -> T {
    reversible_entropy_flux(path, noise) - information_gain(path, noise)
}

/// `∫ dσ²` by quadrature.
pub fn variance_change<T: Scalar>(path: &ProcessPath<T>) -> T {
    path.integrate_segments(|_, _, _, ds| ds)
}

/// `∫ dΘ = ∫ 2(dσ² + σ_R² dm)` by quadrature.
pub fn theta_change<T: Scalar>(path: &ProcessPath<T>, noise: &NoiseModel<T>) -> T {
    let r = noise.sigma_r2();
    path.integrate_segments(|_, _, dm, ds| T::two() * (ds + r * dm))
}

/// `∫ Θ dH`, with `dH` expanded through the analytic partials.
pub fn theta_dh<T: Scalar>(path: &ProcessPath<T>, noise: &NoiseModel<T>) -> T {
    let r = noise.sigma_r2();
    path.integrate_segments(|m, s2, dm, ds| {
        let th = T::two() * (s2 + m * r);
        if th == T::zero() {
            return T::zero();
        }
        th * (ds / th - s2 / (th * m) * dm)
    })
}

/// First-law balance `dσ² = Θ dH + (σ²/m) dm` on one straight segment,
/// discretized into `n_steps` equal steps with midpoint `Θ` and `σ²/m` and
/// exact `ΔH`. Returns the largest magnitude of the running (cumulative)
/// imbalance, which vanishes at second order in the step size.
pub fn segment_first_law_residual<T: Scalar>(
    a: PathNode<T>,
    b: PathNode<T>,
    noise: &NoiseModel<T>,
    n_steps: usize,
) -> Result<T> {
    if n_steps < 2 {
        return Err(invalid("n_steps", n_steps as f64, "must be >= 2"));
    }
    let r = noise.sigma_r2();
    let n = T::of_usize(n_steps);
    let at = |k: T| PathNode {
        m: a.m + (b.m - a.m) * k / n,
        sigma2: (a.sigma2 + (b.sigma2 - a.sigma2) * k / n).max(T::zero()),
    };
    let mut running = T::zero();
    let mut worst = T::zero();
    let mut prev = a;
    let mut h_prev = state::entropy(&a.state(), noise)?;
    for k in 1..=n_steps {
        let next = at(T::of_usize(k));
        let h_next = state::entropy(&next.state(), noise)?;
        let mid_m = (prev.m + next.m) * T::half();
        let mid_s = (prev.sigma2 + next.sigma2) * T::half();
        let th = T::two() * (mid_s + mid_m * r);
        let residual =
            (next.sigma2 - prev.sigma2) - (th * (h_next - h_prev) + mid_s / mid_m * (next.m - prev.m));
        running += residual;
        worst = worst.max(running.abs());
        prev = next;
        h_prev = h_next;
    }
    Ok(worst)
}

/// [`segment_first_law_residual`] maximized over the segments of a path.
pub fn first_law_residual<T: Scalar>(
    path: &ProcessPath<T>,
    noise: &NoiseModel<T>,
    n_steps: usize,
) -> Result<T> {
    path.segments().try_fold(T::zero(), |acc, (a, b)| {
        Ok(acc.max(segment_first_law_residual(a, b, noise, n_steps)?))
    })
}

/// Canonical quasi-processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process<T> {
    /// `dm = 0`; σ² moves to `end_sigma2`.
    Isochoric { end_sigma2: T },
    /// Constant `σ²/m`, hence constant `H`.
    Adiabatic { end_m: T },
    /// Constant `Θ`, i.e. `dσ² = −σ_R² dm`.
    Isothermal { end_m: T },
}

/// Discretizes a quasi-process from `start` into `n_nodes` nodes.
pub fn make_process<T: Scalar>(
    process: Process<T>,
    start: PathNode<T>,
    noise: &NoiseModel<T>,
    n_nodes: usize,
) -> Result<ProcessPath<T>> {
    start.validate()?;
    if n_nodes < 2 {
        return Err(invalid("n_nodes", n_nodes as f64, "must be >= 2"));
    }
    let last = T::of_usize(n_nodes - 1);
    let frac = |i: usize| T::of_usize(i) / last;
    let nodes: Vec<PathNode<T>> = match process {
        Process::Isochoric { end_sigma2 } => {
            if !(end_sigma2 >= T::zero()) {
                return Err(invalid("end_sigma2", end_sigma2.as_f64(), "must be >= 0"));
            }
            (0..n_nodes)
                .map(|i| PathNode {
                    m: start.m,
                    sigma2: start.sigma2 + (end_sigma2 - start.sigma2) * frac(i),
                })
                .collect()
        }
        Process::Adiabatic { end_m } => {
            check_end_m(end_m)?;
            let ratio = start.sigma2 / start.m;
            (0..n_nodes)
                .map(|i| {
                    let m = start.m + (end_m - start.m) * frac(i);
                    PathNode { m, sigma2: ratio * m }
                })
                .collect()
        }
        Process::Isothermal { end_m } => {
            check_end_m(end_m)?;
            let r = noise.sigma_r2();
            let end_sigma2 = start.sigma2 - r * (end_m - start.m);
            // Allow rounding at exactly zero.
            let floor = -T::of(8.0) * T::epsilon() * (start.sigma2 + r * end_m);
            if end_sigma2 < floor {
                return Err(Error::InfeasibleProcess {
                    m: end_m.as_f64(),
                    sigma2: end_sigma2.as_f64(),
                });
            }
            (0..n_nodes)
                .map(|i| {
                    let m = start.m + (end_m - start.m) * frac(i);
                    let s2 = start.sigma2 - r * (m - start.m);
                    PathNode { m, sigma2: s2.max(T::zero()) }
                })
                .collect()
        }
    };
    ProcessPath::new(nodes)
}

fn check_end_m<T: Scalar>(end_m: T) -> Result<()> {
    if !(end_m > T::zero()) || !end_m.is_finite() {
        return Err(invalid("end_m", end_m.as_f64(), "must be finite and > 0"));
    }
    Ok(())
}

/// A closed [`ProcessPath`]: first and last node coincide to `1e-12`
/// relative tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CyclePath<T> {
    path: ProcessPath<T>,
}

impl<'de, T: Scalar> Deserialize<'de> for CyclePath<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let path = ProcessPath::<T>::deserialize(d)?;
        CyclePath::from_path(path).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> CyclePath<T> {
    pub fn from_path(path: ProcessPath<T>) -> Result<Self> {
        let (a, b) = (path.start(), path.end());
        let scale = a.m.abs().max(a.sigma2.abs()).max(T::one());
        let gap = (a.m - b.m).abs().max((a.sigma2 - b.sigma2).abs()) / scale;
        if gap > T::of(1e-12) {
            return Err(Error::NotACycle { gap: gap.as_f64() });
        }
        Ok(Self { path })
    }

    pub fn new(nodes: Vec<PathNode<T>>) -> Result<Self> {
        Self::from_path(ProcessPath::new(nodes)?)
    }

    /// Closes the ring of `(m, σ²)` vertices by repeating the first one.
    pub fn from_ring(ring: &[(T, T)]) -> Result<Self> {
        let mut pairs = ring.to_vec();
        if let Some(&first) = ring.first() {
            if ring.last() != Some(&first) {
                pairs.push(first);
            }
        }
        Self::from_path(ProcessPath::from_pairs(&pairs)?)
    }

    pub fn path(&self) -> &ProcessPath<T> {
        &self.path
    }

    fn ring(&self) -> Vec<(T, T)> {
        self.path.nodes.iter().map(|n| (n.m, n.sigma2)).collect()
    }

    /// Shoelace area in the `(m, σ²)` plane, positive for counter-clockwise
    /// traversal with `m` on the horizontal axis.
    pub fn signed_area(&self) -> T {
        geometry::signed_area(&geometry::open_ring(&self.ring()))
    }

    pub fn orientation(&self) -> Orientation {
        geometry::orientation(&geometry::open_ring(&self.ring()))
    }

    pub fn min_m(&self) -> T {
        self.path
            .nodes
            .iter()
            .map(|n| n.m)
            .fold(T::infinity(), T::min)
    }

    pub fn reversed(&self) -> Self {
        Self {
            path: self.path.reversed(),
        }
    }
}

/// Loop integrals of exact and inexact differentials over a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport<T> {
    pub dh_loop: T,
    pub dsigma2_loop: T,
    pub dtheta_loop: T,
    pub theta_dh_loop: T,
    pub sampling_work: T,
    pub information_gain: T,
    pub signed_area: T,
    pub orientation: Orientation,
}

impl<T: Scalar> ClosureReport<T> {
    /// All three exact-differential loop integrals below `tol`.
    pub fn exact(&self, tol: T) -> bool {
        self.dh_loop.abs() < tol && self.dsigma2_loop.abs() < tol && self.dtheta_loop.abs() < tol
    }
}

pub fn cycle_closure_check<T: Scalar>(
    cycle: &CyclePath<T>,
    noise: &NoiseModel<T>,
) -> ClosureReport<T> {
    let p = cycle.path();
    ClosureReport {
        dh_loop: entropy_change(p, noise),
        dsigma2_loop: variance_change(p),
        dtheta_loop: theta_change(p, noise),
        theta_dh_loop: theta_dh(p, noise),
        sampling_work: sampling_work(p),
        information_gain: information_gain(p, noise),
        signed_area: cycle.signed_area(),
        orientation: cycle.orientation(),
    }
}

/// Summary of the line integrals of an open path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathReport<T> {
    pub sampling_work: T,
    pub information_gain: T,
    pub reversible_entropy_flux: T,
    pub entropy_change: T,
    pub entropy_difference: Option<T>,
    pub first_law_residual: Option<T>,
}

pub fn path_report<T: Scalar>(
    path: &ProcessPath<T>,
    noise: &NoiseModel<T>,
    n_steps: usize,
) -> PathReport<T> {
    let flux = reversible_entropy_flux(path, noise);
    let gain = information_gain(path, noise);
    let h = |n: PathNode<T>| state::entropy(&n.state(), noise).ok();
    let entropy_difference = match (h(path.start()), h(path.end())) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some(b - a),
        _ => None,
    };
    PathReport {
        sampling_work: sampling_work(path),
        information_gain: gain,
        reversible_entropy_flux: flux,
        entropy_change: flux - gain,
        entropy_difference,
        first_law_residual: first_law_residual(path, noise, n_steps).ok(),
    }
}

//! Maximum-information sampling trajectories under a sampling-work budget,
//! the capacity-like information bound, and efficiency bounds.
//!
//! The optimal variance profile keeps `Θ/√m` constant:
//! `σ²(m) = c √m − m σ_R²` with
//! `c = (W + σ_R²(m_b − m_a)) / (2(√m_b − √m_a))`.

mod dp;

pub use dp::{dp_oracle, DpGrid, DpOracle, DpSolution};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::{self, CyclePath, PathNode, ProcessPath};
use crate::scalar::Scalar;
use crate::state::{self, InferenceState, NoiseModel};

/// Maximize information gained from `m_a` to `m_b` for sampling work `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetProblem<T> {
    m_a: T,
    m_b: T,
    work_budget: T,
    noise: NoiseModel<T>,
}

impl<T: Scalar> BudgetProblem<T> {
    pub fn new(m_a: T, m_b: T, work_budget: T, noise: NoiseModel<T>) -> Result<Self> {
        if !(m_a > T::zero()) || !m_a.is_finite() {
            return Err(invalid("m_a", m_a.as_f64(), "must be finite and > 0"));
        }
        if !(m_b > m_a) || !m_b.is_finite() {
            return Err(invalid("m_b", m_b.as_f64(), "must be finite and > m_a"));
        }
        if !(work_budget > T::zero()) || !work_budget.is_finite() {
            return Err(invalid("work_budget", work_budget.as_f64(), "must be finite and > 0"));
        }
        Ok(Self {
            m_a,
            m_b,
            work_budget,
            noise,
        })
    }

    pub fn m_a(&self) -> T {
        self.m_a
    }
    pub fn m_b(&self) -> T {
        self.m_b
    }
    pub fn work_budget(&self) -> T {
        self.work_budget
    }
    pub fn noise(&self) -> &NoiseModel<T> {
        &self.noise
    }

    /// `c` of the optimal profile.
    pub fn coefficient(&self) -> T {
        let r = self.noise.sigma_r2();
        (self.work_budget + r * (self.m_b - self.m_a))
            / (T::two() * (self.m_b.sqrt() - self.m_a.sqrt()))
    }
}

/// Closed-form optimal variance trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalTrajectory<T> {
    pub coefficient: T,
    pub problem: BudgetProblem<T>,
    pub feasible: bool,
}

impl<T: Scalar> OptimalTrajectory<T> {
    fn r(&self) -> T {
        self.problem.noise.sigma_r2()
    }

    /// `σ²_opt(m) = c√m − mσ_R²`.
    pub fn sigma2_at(&self, m: T) -> T {
        self.coefficient * m.sqrt() - m * self.r()
    }

    /// `Θ(m) = 2c√m` along the trajectory.
    pub fn theta_at(&self, m: T) -> T {
        T::two() * (self.sigma2_at(m) + m * self.r())
    }

    /// `Θ/√m`, constant along the trajectory.
    pub fn theta_over_sqrt_m(&self, m: T) -> T {
        self.theta_at(m) / m.sqrt()
    }

    /// Closed-form work spent from `m_a` to `m`.
    pub fn running_work(&self, m: T) -> T {
        let m_a = self.problem.m_a;
        T::two() * self.coefficient * (m.sqrt() - m_a.sqrt()) - self.r() * (m - m_a)
    }

    /// Closed-form information gained from `m_a` to `m`.
    pub fn running_gain(&self, m: T) -> T {
        let m_a = self.problem.m_a;
        T::half() * (m / m_a).ln() - self.r() / self.coefficient * (m.sqrt() - m_a.sqrt())
    }

    /// Location of the interior maximum of `σ²_opt`, `(c/(2σ_R²))²`, if it
    /// falls strictly inside `(m_a, m_b)`.
    pub fn peak_m(&self) -> Option<T> {
        let r = self.r();
        if r <= T::zero() {
            return None;
        }
        let m = (self.coefficient / (T::two() * r)).powi(2);
        (m > self.problem.m_a && m < self.problem.m_b).then_some(m)
    }

    /// Samples the trajectory at `n_nodes` equally spaced `m`.
    pub fn samples(&self, n_nodes: usize) -> Vec<TrajectorySample<T>> {
        let n = n_nodes.max(2);
        let (a, b) = (self.problem.m_a, self.problem.m_b);
        (0..n)
            .map(|i| {
                let m = if i == n - 1 {
                    b
                } else {
                    a + (b - a) * T::of_usize(i) / T::of_usize(n - 1)
                };
                TrajectorySample {
                    m,
                    sigma2_opt: self.sigma2_at(m).max(T::zero()),
                    theta: self.theta_at(m),
                    running_work: self.running_work(m),
                    running_gain: self.running_gain(m),
                }
            })
            .collect()
    }

    /// Piecewise-linear interpolant through [`Self::samples`].
    pub fn path(&self, n_nodes: usize) -> Result<ProcessPath<T>> {
        ProcessPath::new(
            self.samples(n_nodes)
                .into_iter()
                .map(|s| PathNode { m: s.m, sigma2: s.sigma2_opt })
                .collect(),
        )
    }
}

/// One CSV row of an optimal trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample<T> {
    pub m: T,
    pub sigma2_opt: T,
    pub theta: T,
    pub running_work: T,
    pub running_gain: T,
}

/// Solves the budget problem in closed form. Budgets whose trajectory dips
/// below `σ² = 0` are rejected, not clipped.
pub fn solve_optimal<T: Scalar>(problem: &BudgetProblem<T>) -> Result<OptimalTrajectory<T>> {
    let c = problem.coefficient();
    let r = problem.noise.sigma_r2();
    // σ²_opt = √m (c − r√m) is non-negative iff √m ≤ c/r.
    if r > T::zero() {
        let limit = c / r;
        if problem.m_b.sqrt() > limit * (T::one() + T::of(1e-12)) {
            return Err(Error::InfeasibleBudget {
                from: (limit * limit).max(problem.m_a).as_f64(),
                to: problem.m_b.as_f64(),
            });
        }
    }
    Ok(OptimalTrajectory {
        coefficient: c,
        problem: *problem,
        feasible: true,
    })
}

/// `ΔI_opt = ½ log(m_b/m_a) − 2σ_R²(√m_b − √m_a)² / (W + (m_b − m_a)σ_R²)`.
pub fn optimal_info_gain<T: Scalar>(problem: &BudgetProblem<T>) -> Result<T> {
    solve_optimal(problem)?;
    let r = problem.noise.sigma_r2();
    let (a, b, w) = (problem.m_a, problem.m_b, problem.work_budget);
    let gap = b.sqrt() - a.sqrt();
    Ok(max_info_bound(a, b)? - T::two() * r * gap * gap / (w + (b - a) * r))
}

/// `½ log(m_b/m_a)`: no path from `m_a` to `m_b` gains more.
pub fn max_info_bound<T: Scalar>(m_a: T, m_b: T) -> Result<T> {
    if !(m_a > T::zero()) || !(m_b >= m_a) {
        return Err(invalid("m_b", m_b.as_f64(), "need m_b >= m_a > 0"));
    }
    Ok(T::half() * (m_b / m_a).ln())
}

/// Global information efficiency of a cycle against its local bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEfficiency<T> {
    pub information: T,
    pub work: T,
    /// `information / work`
    pub ratio: T,
    /// `1/Θ_C(m_*)` at the smallest `m` on the cycle.
    pub bound: T,
    pub m_min: T,
    /// `(σ²/m) dm` keeps one sign along the whole cycle.
    pub sign_definite: bool,
    pub holds: bool,
}

pub fn global_efficiency_bound<T: Scalar>(
    cycle: &CyclePath<T>,
    noise: &NoiseModel<T>,
) -> Result<GlobalEfficiency<T>> {
    let p = cycle.path();
    let work = paths::sampling_work(p);
    let information = paths::information_gain(p, noise);
    let scale = p
        .segments()
        .map(|(a, b)| ((a.sigma2 + b.sigma2) / (a.m.min(b.m)) * (b.m - a.m)).abs())
        .fold(T::zero(), |x, y| x + y);
    if work.abs() <= T::of(1e-12) * scale.max(T::min_positive_value()) || work == T::zero() {
        return Err(Error::UndefinedRatio);
    }
    let m_min = cycle.min_m();
    let floor = state::theta_floor(m_min, noise);
    let bound = floor.recip();
    let ratio = information / work;
    let mut pos = false;
    let mut neg = false;
    for (a, b) in p.segments() {
        let dm = b.m - a.m;
        let carries = a.sigma2 > T::zero() || b.sigma2 > T::zero();
        if dm != T::zero() && carries {
            if dm > T::zero() {
                pos = true;
            } else {
                neg = true;
            }
        }
    }
    Ok(GlobalEfficiency {
        information,
        work,
        ratio,
        bound,
        m_min,
        sign_definite: !(pos && neg),
        holds: ratio <= bound * (T::one() + T::of(1e-12)),
    })
}

/// Direction of least change in entropy production for a variance step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryDirection<T> {
    pub dm: T,
    pub dsigma2: T,
    /// `dσ²/Θ`, identical at both ends of the stationary step.
    pub production: T,
    /// Smallest `|δ(dΣ)|` found among the probed perturbed directions; strictly
    /// positive when the stationary direction is a strict minimum.
    pub min_perturbed_variation: T,
    pub verified: bool,
}

/// Variation `δ(dΣ) = dσ² (Θ⁻¹(end) − Θ⁻¹(start))` of the production for a
/// step `(dm, dσ²)`.
pub fn production_variation<T: Scalar>(
    point: &InferenceState<T>,
    noise: &NoiseModel<T>,
    dm: T,
    dsigma2: T,
) -> T {
    let r = noise.sigma_r2();
    let th0 = state::theta(point, noise);
    let th1 = T::two() * (point.sigma2() + dsigma2 + (point.m() + dm) * r);
    dsigma2 * (th1.recip() - th0.recip())
}

/// For a fixed variance step `dσ²`, the step in `m` that leaves `Θ`
/// unchanged, `dm = −dσ²/σ_R²`. Along it the production `dσ²/Θ` has zero
/// first variation; every other direction changes it. Minimality is probed
/// on `dm·(1 ± k/8)`, `k = 1..=8`.
pub fn entropy_production_stationarity<T: Scalar>(
    point: &InferenceState<T>,
    noise: &NoiseModel<T>,
    dsigma2: T,
) -> Result<StationaryDirection<T>> {
    let r = noise.sigma_r2();
    if r <= T::zero() {
        return Err(Error::NoStationaryDirection);
    }
    let th = state::theta(point, noise);
    if dsigma2 == T::zero() {
        return Ok(StationaryDirection {
            dm: T::zero(),
            dsigma2,
            production: T::zero(),
            min_perturbed_variation: T::zero(),
            verified: true,
        });
    }
    let dm = -dsigma2 / r;
    let at_stationary = production_variation(point, noise, dm, dsigma2).abs();
    let min_perturbed = (1..=8)
        .flat_map(|k| {
            let f = T::of(k as f64 / 8.0);
            [T::one() + f, T::one() - f]
        })
        .map(|s| production_variation(point, noise, dm * s, dsigma2).abs())
        .fold(T::infinity(), T::min);
    Ok(StationaryDirection {
        dm,
        dsigma2,
        production: dsigma2 / th,
        min_perturbed_variation: min_perturbed,
        verified: min_perturbed > at_stationary,
    })
}

//! Exhaustive dynamic program over a discretized `(m, σ²)` grid, used as an
//! independent certificate for the closed-form optimum.
//!
//! `m` is discretized geometrically, so every step has the same log-width
//! `Δℓ` and a constant variance `s` on a step costs exactly `s·Δℓ` of
//! sampling work. The default variance levels are integer multiples of
//! `bin/Δℓ`, which makes every step cost a whole number of budget bins: the
//! DP is exact on its grid and never exceeds the budget. Explicit levels are
//! charged the ceiling of their cost in bins, which is conservative.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::{PathNode, ProcessPath};
use crate::scalar::Scalar;
use crate::state::NoiseModel;

use super::BudgetProblem;

/// Grid resolution: `m_nodes` grid points in `m`, `sigma_levels` variance
/// levels, `budget_bins` levels of used budget (including zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpGrid<T> {
    pub m_nodes: usize,
    pub sigma_levels: usize,
    pub budget_bins: usize,
    /// Replaces the budget-aligned default levels when set.
    pub explicit_levels: Option<Vec<T>>,
}

impl<T: Scalar> DpGrid<T> {
    pub fn cube(n: usize) -> Self {
        Self {
            m_nodes: n,
            sigma_levels: n,
            budget_bins: n,
            explicit_levels: None,
        }
    }

    pub fn with_levels(mut self, levels: Vec<T>) -> Self {
        self.sigma_levels = levels.len();
        self.explicit_levels = Some(levels);
        self
    }
}

/// Problem data for the oracle. Unlike [`BudgetProblem`] it admits a zero
/// budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOracle<T> {
    pub m_a: T,
    pub m_b: T,
    pub work_budget: T,
    pub noise: NoiseModel<T>,
}

impl<T: Scalar> From<&BudgetProblem<T>> for DpOracle<T> {
    fn from(p: &BudgetProblem<T>) -> Self {
        Self {
            m_a: p.m_a(),
            m_b: p.m_b(),
            work_budget: p.work_budget(),
            noise: *p.noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct DpSolution<T> {
    pub best_gain: T,
    pub best_path: ProcessPath<T>,
    /// Exact sampling work of `best_path`.
    pub work_used: T,
    /// Budget represented by one bin.
    pub bin_width: T,
    /// Variance chosen on each `m` step.
    pub levels: Vec<T>,
}

/// Information gained on `[m1, m2]` at constant variance `s`.
fn step_gain<T: Scalar>(m1: T, m2: T, s: T, r: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    T::half() * ((m2 / m1).ln() - ((s + r * m2) / (s + r * m1)).ln())
}

impl<T: Scalar> DpOracle<T> {
    pub fn new(m_a: T, m_b: T, work_budget: T, noise: NoiseModel<T>) -> Result<Self> {
        if !(m_a > T::zero()) || !(m_b > m_a) {
            return Err(invalid("m_b", m_b.as_f64(), "need m_b > m_a > 0"));
        }
        if !(work_budget >= T::zero()) || !work_budget.is_finite() {
            return Err(invalid("work_budget", work_budget.as_f64(), "must be finite and >= 0"));
        }
        Ok(Self {
            m_a,
            m_b,
            work_budget,
            noise,
        })
    }

    pub fn solve(&self, grid: &DpGrid<T>) -> Result<DpSolution<T>> {
        if grid.m_nodes < 8 || grid.budget_bins < 8 {
            return Err(invalid("grid", grid.m_nodes.min(grid.budget_bins) as f64, "sizes must be >= 8"));
        }
        if grid.explicit_levels.is_none() && grid.sigma_levels < 8 {
            return Err(invalid("sigma_levels", grid.sigma_levels as f64, "must be >= 8"));
        }
        let steps = grid.m_nodes - 1;
        let bins = grid.budget_bins;
        let r = self.noise.sigma_r2();
        let dl = (self.m_b / self.m_a).ln() / T::of_usize(steps);
        let ms: Vec<T> = (0..=steps)
            .map(|j| {
                if j == steps {
                    self.m_b
                } else {
                    self.m_a * (dl * T::of_usize(j)).exp()
                }
            })
            .collect();
        let bin = self.work_budget / T::of_usize(bins - 1);

        // (variance, cost in bins); unaffordable levels are dropped.
        let levels: Vec<(T, usize)> = match &grid.explicit_levels {
            None => {
                if bin == T::zero() {
                    vec![(T::zero(), 0)]
                } else {
                    let h = bin / dl;
                    (0..grid.sigma_levels.min(bins))
                        .map(|q| (h * T::of_usize(q), q))
                        .collect()
                }
            }
            Some(explicit) => explicit
                .iter()
                .filter_map(|&s| {
                    if !(s >= T::zero()) {
                        return None;
                    }
                    if s == T::zero() {
                        return Some((s, 0));
                    }
                    if bin == T::zero() {
                        return None;
                    }
                    let units = s * dl / bin;
                    let cost = (units - T::of(1e-9)).ceil().max(T::zero()).to_usize()?;
                    (cost < bins).then_some((s, cost))
                })
                .collect(),
        };
        if levels.is_empty() {
            return Err(Error::NoFeasiblePath);
        }

        let neg = T::neg_infinity();
        let mut value = vec![neg; bins];
        value[0] = T::zero();
        // choice[j][b] = level index taken on step j arriving at used-bins b
        let mut choice = vec![vec![usize::MAX; bins]; steps];
        for j in 0..steps {
            let gains: Vec<T> = levels
                .iter()
                .map(|&(s, _)| step_gain(ms[j], ms[j + 1], s, r))
                .collect();
            let mut next = vec![neg; bins];
            for (b, &v) in value.iter().enumerate() {
                if v == neg {
                    continue;
                }
                for (li, &(_, cost)) in levels.iter().enumerate() {
                    let nb = b + cost;
                    if nb >= bins {
                        continue;
                    }
                    let cand = v + gains[li];
                    if cand > next[nb] {
                        next[nb] = cand;
                        choice[j][nb] = li;
                    }
                }
            }
            value = next;
        }

        let (mut b, best_gain) = value
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != neg)
            .fold((usize::MAX, neg), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if b == usize::MAX {
            return Err(Error::NoFeasiblePath);
        }

        let mut picked = vec![T::zero(); steps];
        for j in (0..steps).rev() {
            let li = choice[j][b];
            picked[j] = levels[li].0;
            b -= levels[li].1;
        }

        let mut nodes: Vec<PathNode<T>> = Vec::with_capacity(2 * steps + 1);
        for (j, &s) in picked.iter().enumerate() {
            for node in [PathNode { m: ms[j], sigma2: s }, PathNode { m: ms[j + 1], sigma2: s }] {
                if nodes.last() != Some(&node) {
                    nodes.push(node);
                }
            }
        }
        let work_used = picked.iter().fold(T::zero(), |acc, &s| acc + s * dl);
        Ok(DpSolution {
            best_gain,
            best_path: ProcessPath::new(nodes)?,
            work_used,
            bin_width: bin,
            levels: picked,
        })
    }
}

/// Runs the oracle for a [`BudgetProblem`].
pub fn dp_oracle<T: Scalar>(problem: &BudgetProblem<T>, grid: &DpGrid<T>) -> Result<DpSolution<T>> {
    DpOracle::from(problem).solve(grid)
}

//! Closed-form state functions at a single point `(m, σ²)` of the inference
//! state space.
//!
//! `m` is the (continuous) effective sample size and `σ²` the per-observation
//! variance, i.e. the inverse Fisher information of one observation. The
//! representation noise `σ_R²` is carried by [`NoiseModel`]. Entropies are in
//! nats.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// How the additive constant of the entropy is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyConstant<T> {
    /// Constant `-½ log σ_R²`, so that `H` is a mutual information and
    /// vanishes as `m → ∞`.
    MutualInfo,
    /// User supplied constant in nats.
    Raw(T),
}

/// Representation noise variance and entropy convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    sigma_r2: T,
    constant: EntropyConstant<T>,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(sigma_r2: T, constant: EntropyConstant<T>) -> Result<Self> {
        if !(sigma_r2 >= T::zero()) || !sigma_r2.is_finite() {
            return Err(invalid("sigma_r2", sigma_r2.as_f64(), "must be finite and >= 0"));
        }
        if let EntropyConstant::Raw(c) = constant {
            if !c.is_finite() {
                return Err(invalid("entropy constant", c.as_f64(), "must be finite"));
            }
        }
        Ok(Self { sigma_r2, constant })
    }

    /// Mutual-information convention. `sigma_r2 = 0` is accepted here; only
    /// the entropy itself rejects it.
    pub fn mutual_info(sigma_r2: T) -> Result<Self> {
        Self::new(sigma_r2, EntropyConstant::MutualInfo)
    }

    pub fn raw(sigma_r2: T, constant: T) -> Result<Self> {
        Self::new(sigma_r2, EntropyConstant::Raw(constant))
    }

    #[inline]
    pub fn sigma_r2(&self) -> T {
        self.sigma_r2
    }

    #[inline]
    pub fn constant(&self) -> EntropyConstant<T> {
        self.constant
    }

    /// Same convention with a different noise variance.
    pub fn with_sigma_r2(&self, sigma_r2: T) -> Result<Self> {
        Self::new(sigma_r2, self.constant)
    }
}

/// A point `(m, σ²)` of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceState<T> {
    m: T,
    sigma2: T,
}

impl<T: Scalar> InferenceState<T> {
    pub fn new(m: T, sigma2: T) -> Result<Self> {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(invalid("m", m.as_f64(), "must be finite and > 0"));
        }
        if !(sigma2 >= T::zero()) || !sigma2.is_finite() {
            return Err(invalid("sigma2", sigma2.as_f64(), "must be finite and >= 0"));
        }
        Ok(Self { m, sigma2 })
    }

    #[inline]
    pub fn m(&self) -> T {
        self.m
    }

    #[inline]
    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// Estimator variance `σ²/m`.
    #[inline]
    pub fn estimator_variance(&self) -> T {
        self.sigma2 / self.m
    }

    /// Fisher information per observation, `1/σ²` (infinite at `σ² = 0`).
    #[inline]
    pub fn fisher_information(&self) -> T {
        self.sigma2.recip()
    }

    /// `(λm, λσ²)`.
    pub fn scaled(&self, lambda: T) -> Result<Self> {
        Self::new(self.m * lambda, self.sigma2 * lambda)
    }
}

/// `H = ½ log(σ²/m + σ_R²) + constant`.
///
/// Under [`EntropyConstant::MutualInfo`] this is `½ log(1 + σ²/(m σ_R²)) ≥ 0`
/// and requires `σ_R² > 0`. Under [`EntropyConstant::Raw`] a state with
/// `σ²/m + σ_R² = 0` yields `-∞`, which callers can test with
/// `is_infinite()`.
pub fn entropy<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> Result<T> {
    let sr2 = noise.sigma_r2();
    match noise.constant() {
        EntropyConstant::MutualInfo => {
            if sr2 <= T::zero() {
                return Err(Error::InvalidConvention);
            }
            Ok(T::half() * (state.sigma2 / (state.m * sr2)).ln_1p())
        }
        EntropyConstant::Raw(c) => {
            let total = state.estimator_variance() + sr2;
            if total <= T::zero() {
                return Ok(T::neg_infinity());
            }
            Ok(T::half() * total.ln() + c)
        }
    }
}

/// Uncertainty susceptibility `Θ = 2(σ² + m σ_R²)`.
#[inline]
pub fn theta<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> T {
    T::two() * (state.sigma2 + state.m * noise.sigma_r2())
}

/// Noise-floor value `Θ_C = 2 m σ_R²`, the minimum of `Θ` at fixed `m`.
#[inline]
pub fn theta_floor<T: Scalar>(m: T, noise: &NoiseModel<T>) -> T {
    T::two() * m * noise.sigma_r2()
}

/// Local information efficiency `η = Θ_C / Θ ∈ (0, 1]`.
pub fn efficiency<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> Result<T> {
    if noise.sigma_r2() <= T::zero() {
        return Err(Error::EfficiencyUndefined);
    }
    Ok(theta_floor(state.m, noise) / theta(state, noise))
}

/// Gaussian-channel minimum mean-square error `2σ²σ_R²/Θ`.
pub fn mmse<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> Result<T> {
    let th = theta(state, noise);
    if th <= T::zero() {
        return Err(Error::DegenerateState);
    }
    Ok(T::two() * state.sigma2 * noise.sigma_r2() / th)
}

/// The four partial-derivative relations of the entropy function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials<T> {
    /// `(∂H/∂σ²)_m = 1/Θ`
    pub dh_dsigma2: T,
    /// `(∂H/∂m)_σ² = -σ²/(Θ m)`
    pub dh_dm: T,
    /// `(∂σ²/∂m)_H = σ²/m`
    pub dsigma2_dm_at_h: T,
    /// `(∂Θ/∂m)_H = Θ/m`
    pub dtheta_dm_at_h: T,
}

pub fn partials<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> Result<Partials<T>> {
    let th = theta(state, noise);
    if th <= T::zero() {
        return Err(Error::DegenerateState);
    }
    Ok(Partials {
        dh_dsigma2: th.recip(),
        dh_dm: -state.sigma2 / (th * state.m),
        dsigma2_dm_at_h: state.sigma2 / state.m,
        dtheta_dm_at_h: th / state.m,
    })
}

/// Quasi-specific heat `(∂σ²/∂Θ)_m`, identically ½.
pub fn quasi_specific_heat<T: Scalar>(_state: &InferenceState<T>, _noise: &NoiseModel<T>) -> T {
    // Θ is affine in σ² with slope 2 at fixed m.
    T::half()
}

/// Helmholtz-like `A = σ² − ΘH` and Gibbs-like `G = −ΘH`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiPotentials<T> {
    pub a: T,
    pub g: T,
}

pub fn quasi_potentials<T: Scalar>(
    state: &InferenceState<T>,
    noise: &NoiseModel<T>,
) -> Result<QuasiPotentials<T>> {
    let h = entropy(state, noise)?;
    let th = theta(state, noise);
    let g = -th * h;
    Ok(QuasiPotentials {
        a: state.sigma2 + g,
        g,
    })
}

/// `Θ′ = 2m(V + σ_R²)` for an estimator of variance `V ≥ σ²/m`.
pub fn theta_suboptimal<T: Scalar>(
    v: T,
    state: &InferenceState<T>,
    noise: &NoiseModel<T>,
) -> Result<T> {
    let bound = state.estimator_variance();
    // Admit rounding noise when the caller passes exactly σ²/m recomputed.
    let slack = T::of(4.0) * T::epsilon() * bound;
    if !(v >= bound - slack) {
        return Err(Error::CrlbViolation {
            v: v.as_f64(),
            bound: bound.as_f64(),
        });
    }
    Ok(T::two() * state.m * (v + noise.sigma_r2()))
}

/// Efficiency of a suboptimal estimator, `Θ_C / Θ′`.
pub fn efficiency_suboptimal<T: Scalar>(
    v: T,
    state: &InferenceState<T>,
    noise: &NoiseModel<T>,
) -> Result<T> {
    if noise.sigma_r2() <= T::zero() {
        return Err(Error::EfficiencyUndefined);
    }
    Ok(theta_floor(state.m, noise) / theta_suboptimal(v, state, noise)?)
}

/// Integrand of the information differential, `σ²/(mΘ)`. Zero when `σ² = 0`.
#[inline]
pub(crate) fn information_density<T: Scalar>(m: T, sigma2: T, sigma_r2: T) -> T {
    if sigma2 == T::zero() {
        return T::zero();
    }
    sigma2 / (m * T::two() * (sigma2 + m * sigma_r2))
}

/// Point summary used by reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSummary<T> {
    pub m: T,
    pub sigma2: T,
    pub sigma_r2: T,
    pub entropy: Option<T>,
    pub theta: T,
    pub theta_floor: T,
    pub efficiency: Option<T>,
    pub mmse: Option<T>,
    pub partials: Option<Partials<T>>,
    pub potentials: Option<QuasiPotentials<T>>,
    pub quasi_specific_heat: T,
}

pub fn summarize<T: Scalar>(state: &InferenceState<T>, noise: &NoiseModel<T>) -> StateSummary<T> {
    StateSummary {
        m: state.m,
        sigma2: state.sigma2,
        sigma_r2: noise.sigma_r2(),
        entropy: entropy(state, noise).ok().filter(|h| h.is_finite()),
        theta: theta(state, noise),
        theta_floor: theta_floor(state.m, noise),
        efficiency: efficiency(state, noise).ok(),
        mmse: mmse(state, noise).ok(),
        partials: partials(state, noise).ok(),
        potentials: quasi_potentials(state, noise).ok().filter(|p| p.a.is_finite()),
        quasi_specific_heat: quasi_specific_heat(state, noise),
    }
}

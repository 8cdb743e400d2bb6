//! Thermodynamic bookkeeping for asymptotic statistical inference.
//!
//! An estimate built from `m` samples of a source with variance `σ²`, blurred
//! by Gaussian representation noise `σ_R²`, has entropy
//! `H = ½ log(σ²/m + σ_R²) + const`. The crate treats `(m, σ²)` as a
//! thermodynamic state and provides:
//!
//! * [`state`]: state functions (`H`, `Θ`, efficiency, MMSE, partials),
//! * [`paths`]: sampling work, information and first-law accounting along
//!   paths and cycles,
//! * [`optimal`]: the information-maximizing trajectory under a work budget
//!   and a dynamic-programming cross-check,
//! * [`cycle_laws`]: stimulus loops in `(μ, m)` and the cyclic information
//!   inequality,
//! * [`sensory`]: the adaptation model built on those loops,
//! * [`mc`]: Monte Carlo validation of the asymptotic formulas.
//!
//! Everything except [`mc`] is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below name the common instantiations.

// `!(x > 0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle_laws;
pub mod error;
pub mod geometry;
pub mod mc;
pub mod optimal;
pub mod paths;
pub mod quadrature;
pub mod scalar;
pub mod sensory;
pub mod state;

pub use cycle_laws::{ConstitutiveScaling, StimulusLoop, VarianceLaw, Waveform};
pub use error::{Error, Result};
pub use geometry::Orientation;
pub use optimal::{BudgetProblem, OptimalTrajectory};
pub use paths::{CyclePath, PathNode, ProcessPath};
pub use scalar::Scalar;
pub use sensory::{AdaptationParams, AdaptationTriple};
pub use state::{EntropyConstant, InferenceState, NoiseModel};

pub type InferenceStateF64 = InferenceState<f64>;
pub type InferenceStateF32 = InferenceState<f32>;
pub type NoiseModelF64 = NoiseModel<f64>;
pub type NoiseModelF32 = NoiseModel<f32>;
pub type ProcessPathF64 = ProcessPath<f64>;
pub type ProcessPathF32 = ProcessPath<f32>;
pub type CyclePathF64 = CyclePath<f64>;
pub type CyclePathF32 = CyclePath<f32>;
pub type BudgetProblemF64 = BudgetProblem<f64>;
pub type BudgetProblemF32 = BudgetProblem<f32>;
pub type OptimalTrajectoryF64 = OptimalTrajectory<f64>;
pub type OptimalTrajectoryF32 = OptimalTrajectory<f32>;
pub type ConstitutiveScalingF64 = ConstitutiveScaling<f64>;
pub type ConstitutiveScalingF32 = ConstitutiveScaling<f32>;
pub type StimulusLoopF64 = StimulusLoop<f64>;
pub type StimulusLoopF32 = StimulusLoop<f32>;
pub type AdaptationParamsF64 = AdaptationParams<f64>;
pub type AdaptationParamsF32 = AdaptationParams<f32>;

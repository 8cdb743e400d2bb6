use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type the
/// failing routine was instantiated with.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("mutual-information convention requires sigma_r2 > 0")]
    InvalidConvention,

    #[error("efficiency undefined: noise floor theta_c is zero (sigma_r2 = 0)")]
    EfficiencyUndefined,

    #[error("degenerate state: theta = 0")]
    DegenerateState,

    #[error("estimator variance {v} is below the Cramer-Rao bound {bound}")]
    CrlbViolation { v: f64, bound: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("path is not a closed cycle (closure gap {gap})")]
    NotACycle { gap: f64 },

    #[error("infeasible process: variance would reach {sigma2} at m = {m}")]
    InfeasibleProcess { m: f64, sigma2: f64 },

    #[error("infeasible budget: optimal variance trajectory is negative on m in ({from}, {to}]")]
    InfeasibleBudget { from: f64, to: f64 },

    #[error("no feasible path on the discretization grid")]
    NoFeasiblePath,

    #[error("information/work ratio undefined: net sampling work is zero")]
    UndefinedRatio,

    #[error("no stationary direction: sigma_r2 = 0")]
    NoStationaryDirection,

    #[error("stimulus waveform is not periodic: {0}")]
    NonPeriodic(String),

    #[error("driven trajectory did not close after the transient (relative gap {gap})")]
    NotClosed { gap: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient variation in regressor")]
    InsufficientVariation,

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(&'static str),

    #[error("empty input")]
    EmptyInput,

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}

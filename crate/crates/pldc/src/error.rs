use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rows {i} and {j} share the same predictors but have different responses")]
    DuplicatePredictors { i: usize, j: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("plane count {count} exceeds cap {cap}")]
    PlaneCapExceeded { count: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label {0} is not in {{-1, +1}}")]
    InvalidLabel(f64),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("test responses have zero variance")]
    ZeroVariance,

    #[error("solver produced non-finite values at iteration {0}")]
    NonFinite(usize),

    #[error("problem is infeasible (phase-I optimum {0:.3e} > 0)")]
    Infeasible(f64),

    #[error("problem appears unbounded")]
    Unbounded,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised across the design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix (smallest/largest eigenvalue ratio {ratio:e})")]
    SingularMatrix { ratio: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, scale {scale:e})")]
    NotPsd { eigenvalue: f64, scale: f64 },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("prediction region has zero total weight")]
    EmptyRegion,

    #[error("region moment matrix L is singular")]
    SingularL,

    #[error("efficiency undefined: reference criterion value is {0}")]
    UndefinedEfficiency(f64),

    #[error("constraint set is infeasible")]
    Infeasible,

    #[error("linear program is unbounded along variable {entering}")]
    Unbounded { entering: usize, ray: Vec<f64> },

    #[error("no feasible design with nonsingular information matrix found in {attempts} attempts")]
    SingularStart { attempts: usize },

    #[error("design point {0} has no trials to remove")]
    EmptyPoint(usize),

    #[error("resource caps exhausted before any integer-feasible design was found")]
    ResourceExhausted,

    #[error("starting design is infeasible: {0}")]
    InfeasibleStart(String),

    #[error("efficient rounding needs at least {support} trials, got {trials}")]
    TooFewTrials { support: usize, trials: usize },

    #[error("index {index} out of range for {len} design points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("criterion is not supported here: {0}")]
    UnsupportedCriterion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

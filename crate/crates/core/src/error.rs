use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("f tracking is disabled for this learner")]
    FNotTracked,

    #[error("stacked problem too large: T*d = {size} exceeds budget {budget}")]
    TooLarge { size: usize, budget: usize },

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error(
        "drift regime violated: V = {drift}, low-drift needs V <= {low_threshold}, \
         high-drift needs V >= {high_threshold}{hint}"
    )]
    RegimeViolation {
        drift: f64,
        low_threshold: f64,
        high_threshold: f64,
        hint: &'static str,
    },

    #[error("input dimension {0} is too small (need at least 2)")]
    BadDim(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgo(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

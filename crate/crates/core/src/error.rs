use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not doubly stochastic (max row/column sum deviation {0:e})")]
    NotStochastic(f64),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),

    #[error("no connected graph sampled after {0} attempts")]
    ConnectivityFailure(usize),

    #[error("Newton iteration did not converge within {0} steps")]
    MaxItersExceeded(usize),

    #[error("instance has no reference solution")]
    MissingReference,

    #[error("insufficient data for rate fit: {0}")]
    InsufficientData(String),

    #[error("config parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed: {0}")]
    Validation(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn dim_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

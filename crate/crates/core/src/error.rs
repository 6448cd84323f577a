use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported exponent p = {0}: only finite p >= 2 is supported")]
    InvalidExponent(f64),

    #[error("space dimension must be positive")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid convex set: {0}")]
    InvalidSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

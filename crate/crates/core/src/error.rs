//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A simulation or run specification violates its invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A function argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Tensor or matrix shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numeric failure: non-finite values, covariance lost positive
    /// definiteness, diverging optimization.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A file did not match the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

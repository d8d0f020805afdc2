//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or model parameter is outside its legal domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation was called with inconsistent or degenerate arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Shapes of interacting objects do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The MCMC driver gave up (e.g. zero acceptance after step halving).
    #[error("sampler aborted: {0}")]
    SamplerAbort(String),

    /// A file or record could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the learning and data generation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The caller combined arguments in a way the operation does not support.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("sample stream exhausted after {0} samples")]
    StreamExhausted(usize),

    #[error("center search failed: {0}")]
    SearchExhausted(String),

    #[error("label oracle failed: {0}")]
    Oracle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

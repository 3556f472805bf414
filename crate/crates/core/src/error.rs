//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by library operations.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Bad configuration: missing rule entries, invalid parameter ranges,
    /// inconsistent dimensions requested by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A computation failed at runtime (non-finite values, degenerate
    /// linear systems, ...).
    #[error("runtime error: {0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CoreError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CoreError::Runtime(msg.into())
    }
}

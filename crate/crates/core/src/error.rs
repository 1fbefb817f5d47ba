//! Library-wide error type.

use thiserror::Error;

/// Errors produced while loading configuration or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// Scenario file or programmatic configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric input or intermediate value was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An operation was asked to work on an empty trace or series.
    #[error("empty input: {0}")]
    Empty(String),

    /// Underlying file I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Shorthand for a config error with formatted context.
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}

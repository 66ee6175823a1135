//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by kernels, graph construction, training and I/O.
#[derive(Debug, Error)]
pub enum RgcnError {
    /// Shape or extent mismatch between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input violates a value-level precondition (e.g. negative adjacency weight).
    #[error("domain error: {0}")]
    Domain(String),

    /// A contraction descriptor outside the supported set.
    #[error("unsupported contraction: {0}")]
    UnsupportedContraction(String),

    /// Invalid argument (counts, rates, fan sizes).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Bad model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset or file-format problems.
    #[error("data error: {0}")]
    Data(String),

    /// Parse failures carry the offending line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Internal consistency violation (unregistered parameter, NaN tensor).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RgcnError>;

impl RgcnError {
    pub fn dimension(msg: impl Into<String>) -> Self {
        RgcnError::Dimension(msg.into())
    }

    /// CLI exit code class: 2 for configuration/usage, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            RgcnError::Config(_) | RgcnError::Argument(_) => 2,
            RgcnError::Data(_) | RgcnError::Parse { .. } | RgcnError::Io(_) => 3,
            _ => 1,
        }
    }
}

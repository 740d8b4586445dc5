//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Scheme construction or cell/index validation failed.
    #[error("invalid scheme or cell: {0}")]
    InvalidScheme(String),

    /// A requested allocation or search exceeded its configured cap.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    /// Input data is malformed (file contents, duplicate keys, bad ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parse error in one of the text formats, with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Numeric failure: overflow, non-finite value, zero where positive
    /// mass is required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Operation requires a weakly hierarchical model.
    #[error("model is not weakly hierarchical: {0}")]
    NotWeaklyHierarchical(String),

    /// A partition block carries zero probability mass.
    #[error("zero-probability block: {0}")]
    ZeroProbabilityBlock(String),

    /// Conditional-independence verification failed beyond tolerance.
    #[error("conditional independence violated: max violation {max_violation}")]
    CiViolation { max_violation: f64 },

    /// Checkpoint or other I/O failure.
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;

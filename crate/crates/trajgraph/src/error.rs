//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor dimensions do not line up for the requested operation.
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    /// A line of a dataset file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A file or record set violates a structural guarantee.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A configuration value is out of range or unrecognized.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric argument is outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A name was not found in a known set.
    #[error("unknown name: {0}")]
    Lookup(String),

    /// An index is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A command cannot start because required inputs are missing.
    #[error("startup error: {0}")]
    Startup(String),

    /// A persisted artifact was written by an incompatible version.
    #[error("incompatible format: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }
}

use std::io;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    /// Malformed file contents (bad magic, version, truncated payload, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Inputs violating a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Shape disagreement between fields that must share dims.
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// An iterative method produced non-finite values or hit its hard cap.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn dim_mismatch(expected: &[usize], got: &[usize]) -> Self {
        Error::DimMismatch {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}

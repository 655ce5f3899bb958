use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must live on the same state space do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input rejected by a contract check; `location` names the offending field.
    #[error("invalid input at {location}: {message}")]
    Validation { location: String, message: String },

    #[error("state count {states} exceeds the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A checked inequality was violated beyond its tolerance.
    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }
}

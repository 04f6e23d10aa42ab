use thiserror::Error;

/// Errors raised when a caller breaks an operation's contract.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no arm reaches the success threshold {threshold}")]
    NoSufficientArm { threshold: f64 },

    #[error("every one of the {0} cells has already been measured")]
    AllMeasured(usize),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

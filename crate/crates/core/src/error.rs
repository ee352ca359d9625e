use thiserror::Error;

/// Errors shared by all subsystems.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument failed. The message names the
    /// violated constraint.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (non-positive-definite matrix, embedding
    /// that stays indefinite after doubling, too many non-finite samples).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

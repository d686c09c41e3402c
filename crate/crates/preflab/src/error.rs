//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any work started: bad dimensions, bad config,
    /// invalid scheme/environment combinations, unsatisfiable sampling
    /// constraints.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A numeric routine produced or received a non-finite value.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// An artifact file could not be parsed.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

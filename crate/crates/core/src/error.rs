//! Error type shared by every module.

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A binary file or textual input could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    /// A parameter is outside its admissible range or conflicts with another.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A construction needs a nonzero norm that turned out to be zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// Format and I/O failures map to 2, everything the operator can fix by
    /// changing flags maps to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) | Error::Io(_) => 2,
            Error::Dimension(_) | Error::Config(_) | Error::Degenerate(_) => 3,
        }
    }
}

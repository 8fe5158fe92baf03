use std::fmt;

/// Errors produced anywhere in the sensing pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration or scene document failed to parse or validate.
    #[error("schema error (line {line}): {message}")]
    Schema { line: usize, message: String },

    /// A binary or tabular file did not match its documented layout.
    #[error("format error: {0}")]
    Format(String),

    /// Not enough slow-time history to compute the requested quantity yet.
    #[error("not ready: {0}")]
    NotReady(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    pub fn format(msg: impl fmt::Display) -> Self {
        Error::Format(msg.to_string())
    }

    pub fn schema(line: usize, msg: impl fmt::Display) -> Self {
        Error::Schema {
            line,
            message: msg.to_string(),
        }
    }
}

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was applied to an object in the wrong state
    /// (e.g. a normalized field handed to a physical-space routine).
    #[error("state error: {0}")]
    State(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("format error: {0}")]
    Format(String),

    /// A non-finite value appeared while integrating or evaluating.
    #[error("numeric error at step {step}: {message}")]
    Numeric { step: usize, message: String },

    /// The training loss diverged.
    #[error("training diverged at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

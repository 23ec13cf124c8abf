use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix sizes disagree with the active game.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    /// A configuration value failed validation. `key` names the offending entry.
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("malformed configuration: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Internal invariant violated; indicates a bug in the caller or engine.
    #[error("logic error: {0}")]
    Logic(String),
}

impl Error {
    pub(crate) fn dimension(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

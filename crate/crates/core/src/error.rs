use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record stream line failed to parse or validate.
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },

    /// A record violated an invariant; `field` names the offending field.
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{path}: schema error at `{location}`: {message}")]
    Schema { path: PathBuf, location: String, message: String },

    /// A dataset in a mixture manifest could not be compiled.
    #[error("dataset `{dataset}`: {source}")]
    Dataset {
        dataset: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation { field: field.to_string(), message: message.into() }
    }
}

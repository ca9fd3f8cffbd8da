use thiserror::Error;

/// Errors raised anywhere in the co-VQE pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid stabilizer generators: {0}")]
    InvalidGenerators(String),

    #[error("stabilizer generators do not determine a unique state: {0}")]
    UnderdeterminedState(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("wrong backend: {0}")]
    WrongBackend(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config validation failed for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or usage (exit code 1).
    Config,
    /// Malformed or inconsistent data (exit code 2).
    Data,
    /// Numeric or runtime failure (exit code 3).
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("join error: id `{id}` {message}")]
    Join { id: String, message: String },

    #[error("validation error for `{id}`: {message}")]
    Validation { id: String, message: String },

    #[error("merge error: duplicate id `{id}`")]
    DuplicateId { id: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("alignment error for `{id}`: {message}")]
    Alignment { id: String, message: String },

    #[error("degenerate embedding for `{id}`: {message}")]
    DegenerateEmbedding { id: String, message: String },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("unknown encoder `{name}`; known encoders: {}", known.join(", "))]
    UnknownEncoder { name: String, known: Vec<String> },

    #[error("encoder `{name}` is unavailable: {reason}")]
    EncoderUnavailable { name: String, reason: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::UnknownEncoder { .. } | Error::EncoderUnavailable { .. } | Error::Contract(_) => {
                ErrorClass::Config
            }
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Join { .. }
            | Error::Validation { .. }
            | Error::DuplicateId { .. }
            | Error::Split(_)
            | Error::Alignment { .. }
            | Error::Evaluation(_)
            | Error::Checkpoint(_) => ErrorClass::Data,
            Error::DegenerateEmbedding { .. } | Error::Calibration(_) | Error::NonFinite(_) => {
                ErrorClass::Runtime
            }
        }
    }
}

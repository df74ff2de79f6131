use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown {kind} name {token:?}")]
    UnknownName { kind: &'static str, token: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("operation requires a {expected} model, got {found}")]
    ModelKind { expected: ModelKind, found: ModelKind },

    #[error("{kind} id {id} out of range (size {size})")]
    IdOutOfRange {
        kind: &'static str,
        id: usize,
        size: usize,
    },

    #[error("negative sampling failed: {0}")]
    Sampling(String),

    #[error("non-finite parameters at epoch {epoch}, batch {batch}: {detail}")]
    Numerical {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("model does not match the knowledge base: {0}")]
    Binding(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

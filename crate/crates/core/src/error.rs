use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid meta-path `{spec}`: {msg}")]
    MetaPath { spec: String, msg: String },

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("path count overflow: {0}")]
    Overflow(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged {
        epoch: usize,
        msg: String,
        last_good: Option<Box<ModelParams>>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::MetaPath { .. } => ErrorKind::Usage,
            Error::Overflow(_) | Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
            Error::Graph(_) => "graph",
            Error::MetaPath { .. } => "metapath",
            Error::TypeMismatch(_) => "type_mismatch",
            Error::Overflow(_) => "overflow",
            Error::Shape(_) => "shape",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Checkpoint(_) => "checkpoint",
            Error::NonFinite(_) => "non_finite",
            Error::Diverged { .. } => "diverged",
            Error::Json(_) => "json",
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or configuration.
    Validation,
    /// Failure while computing on valid input.
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
    #[error("missing mandatory file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("duplicate paper_id {0:?}")]
    DuplicatePaper(String),
    #[error("duplicate {section} section for paper {paper_id:?}")]
    DuplicateSection { paper_id: String, section: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid name: {0}")]
    InvalidName(String),
    #[error("relation {relation} cannot connect {head} to {tail}")]
    Signature {
        relation: String,
        head: String,
        tail: String,
    },
    #[error("graph input: {0}")]
    GraphInput(String),
    #[error("{what} index {index} out of bounds (size {size})")]
    OutOfBounds {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error("unknown paper {0:?}")]
    UnknownPaper(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{0}")]
    EmptyInput(String),
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFiniteLoss { .. } | Error::NonConvergence { .. } => ErrorKind::Runtime,
            Error::Io { .. } => ErrorKind::Runtime,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(file: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::MalformedRow {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate batch in batch_norm1d: N*L = {0}, need at least 2 in train mode")]
    DegenerateBatch(usize),

    #[error("stale graph: backward already ran through this graph; run forward again")]
    StaleGraph,

    #[error("cannot ingest {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("codec unavailable: {0}")]
    CodecUnavailable(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Process exit code used by the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Ingestion { .. }
            | Error::UnsupportedFormat { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Checkpoint(_)
            | Error::CodecUnavailable(_) => 3,
            Error::Dimension { .. }
            | Error::Contract(_)
            | Error::DegenerateBatch(_)
            | Error::StaleGraph
            | Error::Numeric(_) => 4,
        }
    }
}

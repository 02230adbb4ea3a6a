use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the dataset, simulation, and training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error in cycle `{cycle_id}`, field `{field}`: {message}")]
    Schema {
        cycle_id: String,
        field: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("array file {path}: {message}")]
    ArrayFormat { path: PathBuf, message: String },

    #[error("metadata file {path}: {message}")]
    Metadata { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("stream `{stream}` does not cover [{start:.3}, {end:.3}] s")]
    SpanNotCovered {
        stream: String,
        start: f64,
        end: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message} at line {line}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: unexpected header; expected `{expected}`")]
    Header { path: String, expected: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0} is not defined for high-speed running")]
    UnsupportedVariable(&'static str),

    #[error("{model} did not converge after {iterations} iterations (max change {max_change:.3e})")]
    NonConvergence {
        model: &'static str,
        iterations: usize,
        max_change: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model file: {0}")]
    ModelFile(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

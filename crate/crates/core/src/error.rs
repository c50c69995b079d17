use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input length mismatch: expected {expected}, got {got}")]
    InputLength { expected: usize, got: usize },

    #[error("value outside the supported domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The autocorrelation of the regressors is numerically singular, which
    /// happens when the neuron output is (close to) identically zero.
    #[error("degenerate channel estimate (condition number {condition:.3e})")]
    DegenerateEstimate { condition: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

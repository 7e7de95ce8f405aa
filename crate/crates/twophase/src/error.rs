//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/op shape violation. Carries the op name plus expected and actual shapes.
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: String,
        expected: String,
        actual: String,
    },

    /// Non-finite values where the pipeline requires finite ones (NaN loss,
    /// inf gradient, ...). Maps to exit code 2 in the CLI.
    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: String, detail: String },

    /// Invalid configuration or user input. Maps to exit code 1 in the CLI.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed or inconsistent dataset/manifest contents.
    #[error("data error: {0}")]
    Data(String),

    /// Resampling plan violations (overlapping regimes, impossible targets).
    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn shape(op: &str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Shape {
            op: op.to_string(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn numeric(context: &str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.to_string(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code for this error: 2 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.
//!
//! Library code returns `Result<T, Error>`; binaries map variants to exit
//! codes (config errors are distinguishable from runtime failures).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value(s). Aggregated where possible.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor/vector dimension mismatch.
    #[error("shape error: expected {expected}, got {got} ({context})")]
    Shape {
        expected: usize,
        got: usize,
        context: String,
    },

    /// Operation called in the wrong order (e.g. backward before forward,
    /// step after episode end).
    #[error("state error: {0}")]
    State(String),

    /// Malformed persisted artifact.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Artifact produced by an incompatible version.
    #[error("version error: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    /// Metric not defined for this action space / environment.
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    /// A required upstream artifact is missing.
    #[error("missing artifact: {path} ({hint})")]
    MissingArtifact { path: String, hint: String },

    /// Non-finite value detected during training; diagnostics attached.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub fn shape(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::Shape {
            expected,
            got,
            context: context.into(),
        }
    }

    /// True for errors that should map to the config exit code.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("wrong point kind: expected {expected}, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("invalid simplex weights: {0}")]
    InvalidSimplex(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("chain diverged at step {step}")]
    Diverged { step: usize },
    #[error("model format error: {0}")]
    Format(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSequence(_) => "invalid_sequence",
            Error::WrongKind { .. } => "wrong_kind",
            Error::InvalidSimplex(_) => "invalid_simplex",
            Error::Shape { .. } => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::Config(_) => "config",
            Error::Empty(_) => "empty_input",
            Error::Diverged { .. } => "diverged",
            Error::Format(_) => "format",
            Error::Parse { .. } => "parse",
            Error::UnknownProblem(_) => "unknown_problem",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

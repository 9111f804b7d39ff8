//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced by geometry, autodiff, data loading, and the CLI.
#[derive(Debug)]
pub enum GeomError {
    /// Shapes or manifold dimensions do not line up.
    Dimension(String),
    /// A numeric routine failed (factorization, eigen iteration, non-finite loss).
    Numeric(String),
    /// Input is too degenerate for the requested statistic.
    Degenerate(String),
    /// A value violates a documented invariant.
    Validation(String),
    /// Malformed text input, with its source location.
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    /// Bad run configuration.
    Config(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, GeomError>;

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::Dimension(msg) => write!(f, "dimension error: {msg}"),
            GeomError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            GeomError::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            GeomError::Validation(msg) => write!(f, "validation error: {msg}"),
            GeomError::Parse {
                path,
                line,
                message,
            } => write!(f, "parse error at {path}:{line}: {message}"),
            GeomError::Config(msg) => write!(f, "config error: {msg}"),
            GeomError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for GeomError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            GeomError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for GeomError {
    fn from(err: io::Error) -> Self {
        GeomError::Io(err)
    }
}

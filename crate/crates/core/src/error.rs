//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("non-finite matrix entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("eigensolver failed to converge for eigenvalue {index}")]
    NoConvergence { index: usize },

    #[error("constraints are linearly dependent (pivot {pivot:e} at constraint {index})")]
    DependentConstraints { index: usize, pivot: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("inconsistent mode selection: {0}")]
    InconsistentMode(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Wraps the error with a call-site context string.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

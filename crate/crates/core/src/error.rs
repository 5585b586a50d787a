use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-positive pivot {value:.3e} at row {row} in Cholesky factorization")]
    NotPositiveDefinite { row: usize, value: f64 },

    #[error("singular pivot {value:.3e} at row {row} in LU factorization")]
    Singular { row: usize, value: f64 },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("only {found} eigenvalues above tolerance, {requested} modes requested")]
    InsufficientModes { requested: usize, found: usize },

    #[error("dense assembly of dimension {required} exceeds cap {cap}")]
    CapExceeded { required: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

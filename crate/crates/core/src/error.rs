use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector system is empty")]
    EmptySystem,

    #[error("vector {0} of the system is zero")]
    ZeroVector(usize),

    #[error("vector system is not orthogonal: max normalized cross product {max_cross:.3e} exceeds {tol:.3e}")]
    NotOrthogonal { max_cross: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state dimension n = {n} is too small for m = {m} snapshots")]
    DimensionTooSmall { n: usize, m: usize },

    #[error("degenerate history: numerical rank {rank} < m = {m}")]
    DegenerateHistory { rank: usize, m: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient data: need {needed} snapshots, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("unsupported model format version {0}")]
    VersionUnsupported(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

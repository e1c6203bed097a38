use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orbital index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("index list {0:?} is not strictly ascending")]
    NotAscending(Vec<usize>),

    /// The middle product G·[O,G]·G matched neither closed-form branch.
    #[error("structural violation classifying {operator} under {generator}: residuals {to_commutator:.3e} / {to_zero:.3e}")]
    StructuralViolation {
        operator: String,
        generator: String,
        to_commutator: f64,
        to_zero: f64,
    },

    #[error("operation `{op}` is not available for {kind} generators")]
    UnsupportedKind { op: &'static str, kind: &'static str },

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not Hermitian (residual {0:.3e})")]
    NonHermitianOperator(f64),

    #[error("Hamiltonian term {0} has a non-real coefficient")]
    ComplexCoefficient(String),

    #[error("empty sector or determinant list")]
    EmptySector,

    #[error("state does not lie in a single particle-number sector or the operator leaks out of it")]
    SectorMismatch,

    #[error("annihilation produced the zero vector")]
    ZeroVector,

    #[error("time grids differ ({0} vs {1} points)")]
    GridMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

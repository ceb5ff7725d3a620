use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("hamiltonian is not hermitian (deviation {0:e})")]
    NonHermitianHamiltonian(f64),

    #[error("lindblad operator {index} is not hermitian")]
    NonHermitianLindblad { index: usize },

    #[error("generator is not self-dual")]
    NotSelfDual,

    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("no physical stationary state in the kernel of the generator")]
    NoStationaryState,

    #[error("time grids differ")]
    TimeGridMismatch,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

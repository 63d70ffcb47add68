use thiserror::Error;

/// Errors raised by the identification, repair and bound computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Schur stable (spectral radius {0:.12})")]
    UnstableMatrix(f64),

    #[error("input matrix is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetricInput(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Riccati equation has no valid solution: {0}")]
    DareInfeasible(String),

    #[error("innovations covariance is numerically singular")]
    SingularQ,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient covariance lags: need {needed}, have {available}")]
    InsufficientLags { needed: usize, available: usize },

    #[error("Hankel matrix is rank deficient at the requested order (sigma ratio {0:.3e})")]
    RankDeficient(f64),

    #[error("shift equation is ill-conditioned (condition number {0:.3e})")]
    IllConditionedShift(f64),

    #[error("closed-loop Riccati matrix has an eigenvalue on the unit circle")]
    SingularJ1,

    #[error("semidefinite solver failed: {0}")]
    SolverFailure(String),

    #[error("no gamma makes the robust bounded-real program feasible")]
    InfeasibleAtAnyGamma,

    #[error("Riccati equation failed after repair: {0}")]
    PostRepairDareFailure(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

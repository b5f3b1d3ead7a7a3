use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("degenerate joint; MI undefined or infinite")]
    DegenerateJoint,

    #[error("entropy is -inf: covariance is singular")]
    SingularEntropy,

    #[error("rank zero: matrix has no nonzero singular value")]
    RankZero,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("budget {budget} exceeds total variance {total}; use zero-MI branch")]
    UseZeroMiBranch { budget: f64, total: f64 },

    #[error("gradient undefined at boundary: zero probability in term {0}")]
    GradientUndefined(&'static str),

    #[error("enumeration bound exceeded: m = {m} > {max}")]
    TooLarge { m: usize, max: usize },

    #[error("matrix csv: {0}")]
    Csv(String),
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pole: {0}")]
    Pole(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("accuracy loss: {0}")]
    AccuracyLoss(String),
    #[error("degenerate connection: {0}")]
    Degenerate(String),
    #[error("no admissible asymptotic regime: {0}")]
    Regime(String),
    #[error("kernel iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("division by a vanishing quantity: {0}")]
    Division(String),
    #[error("point in the exceptional set Z: {0}")]
    ZSet(String),
    #[error("not an eigenvalue: {0}")]
    NotEigenvalue(String),
    #[error("contour passes through a zero: {0}")]
    ContourThroughZero(String),
    #[error("evaluation budget exhausted after {0} evaluations")]
    Budget(usize),
    #[error("support: {0}")]
    Support(String),
    #[error("zero boundary jump: {0}")]
    ZeroJump(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

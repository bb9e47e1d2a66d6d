use thiserror::Error;

use crate::uncertainty::Label;

pub type Result<T> = std::result::Result<T, RcmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RcmError {
    #[error("matrix is not symmetric or has non-finite entries")]
    InvalidMatrix,
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not positive definite")]
    NotSpd,
    #[error("class {0} has no samples")]
    EmptyClass(Label),
    #[error("reduced convex hull is empty: nu = {nu} exceeds nu_max = {nu_max}")]
    InfeasibleRch { nu: f64, nu_max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("uncertainty sets are not separated (distance {distance:e})")]
    NotSeparated { distance: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("direction must have unit norm (norm {0})")]
    InvalidDirection(f64),
    #[error("linearized subproblem is unbounded; the origin is not interior to the difference set")]
    SubproblemUnbounded,
    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("support function is not twice differentiable at this direction")]
    NotDifferentiable,
    #[error("rate {0} is outside (0, 1)")]
    InvalidRate(f64),
    #[error("loss evaluation overflowed")]
    LossOverflow,
    #[error("distribution family is empty")]
    EmptyFamily,
    #[error("loss does not satisfy the sandwich preconditions: {0}")]
    InvalidLoss(String),
    #[error("grid oracle supports dimensions 1 to 3, got {0}")]
    DimensionTooLarge(usize),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("class means coincide")]
    DegenerateMeans,
    #[error("invalid data: {0}")]
    InvalidData(String),
}

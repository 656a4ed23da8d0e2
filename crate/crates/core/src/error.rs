use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("precision matrix has non-zero entry at missing edge ({0}, {1})")]
    PatternViolation(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trace is degenerate: {0}")]
    DegenerateTrace(String),

    #[error("chain is degenerate (zero variance)")]
    DegenerateChain,

    #[error("optimisation did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("line search could not stay inside the positive-definite cone")]
    StepOutOfCone,

    #[error("all {0} burn-in proposals were rejected")]
    AllRejected(usize),

    #[error("input covariance is singular: {0}")]
    SingularInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Crate-wide error type.

use crate::geometry::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("singular evaluation at {0:?}: {1}")]
    SingularEvaluation(Point, &'static str),

    #[error("point {0:?} outside the domain")]
    OutsideDomain(Point),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("Newton iteration failed to converge: {0}")]
    NewtonDiverged(String),

    #[error("linear solve breakdown: {0}")]
    LinearSolve(String),

    #[error("grid cannot resolve the bubble core: {0}")]
    UnderResolved(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),

    #[error("eigensolver failed to converge: {0}")]
    Eigensolver(String),
}

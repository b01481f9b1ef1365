use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("state does not match grid: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("grid incompatibility: {0}")]
    GridIncompatible(String),

    #[error("rationalization tolerance {0:e} is below the 1e-9 guard")]
    ToleranceTooSmall(f64),

    #[error("direction outside sigma table reach: {0}")]
    OutsideTable(String),

    #[error("self-intersecting curve: segments {0} and {1} cross")]
    SelfIntersection(usize, usize),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

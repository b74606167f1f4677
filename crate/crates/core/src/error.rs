use thiserror::Error;

/// Errors raised by the analysis, solver and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("eigenvalue iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph has no directed spanning tree")]
    NoSpanningTree,

    #[error("invalid delay bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid delay profile: {0}")]
    InvalidProfile(String),

    #[error("step size {h} exceeds a quarter of the smallest positive delay {min_delay}")]
    StepTooLarge { h: f64, min_delay: f64 },

    #[error("invalid bracket: {0}")]
    BracketInvalid(String),

    #[error("base delay bounds are not certified feasible")]
    BaseInfeasible,

    #[error("trace too short: {0}")]
    InsufficientTrace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Failure modes of the potential, discretization and solver layers.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("evaluation point within {distance:e} of the singularity")]
    SingularityHit { distance: f64 },
    #[error("node {node} lies within {distance:e} of the singularity")]
    SingularityProximity { node: usize, distance: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shift by {k} periods does not fit on a grid of {nodes} nodes")]
    ShiftOutOfRange { k: i64, nodes: usize },
    #[error("function vanishes identically")]
    ZeroFunction,
    #[error("window [{start}, {end}] leaves the truncated domain")]
    WindowOutOfDomain { start: f64, end: f64 },
    #[error("initial guess has singularity clearance {clearance:e}, below {required:e}")]
    InfeasibleGuess { clearance: f64, required: f64 },
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    MaxItersExceeded { iterations: usize, grad_norm: f64 },
    #[error("line search stalled after {iterations} iterations (gradient norm {grad_norm:e})")]
    LineSearchFailed { iterations: usize, grad_norm: f64 },
    #[error("descent collapsed onto the trivial solution after {iterations} iterations")]
    ConvergedToZero { iterations: usize },
    #[error("no homoclinic candidate after {attempts} attempts: {last}")]
    NoSolutionFound { attempts: usize, last: String },
    #[error("shifted bumps overlap or leave less than the required gap")]
    OverlappingBumps,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("candidate failed verification: {0}")]
    VerificationFailed(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

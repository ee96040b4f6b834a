use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("triangle {index} has non-positive signed area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("gradient vanishes on triangle {triangle} (|grad| = {norm:e}, threshold {threshold:e})")]
    Noncritical {
        triangle: usize,
        norm: f64,
        threshold: f64,
    },

    #[error(
        "newton solver did not converge at delta = {delta:e} after {iterations} iterations: \
         gradient norm {grad_norm:e} > target {target:e} ({reason})"
    )]
    NotConverged {
        delta: f64,
        iterations: usize,
        grad_norm: f64,
        target: f64,
        reason: &'static str,
    },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("solution does not belong to this problem")]
    StaleSolution,

    #[error("exponent domain: {0}")]
    Domain(String),

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scaling sweep failed at lambda = {lambda:e}: {source}")]
    Sweep {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("CGO frame: {0}")]
    Frame(String),

    #[error("runs are not comparable: {0}")]
    Mismatch(String),
}

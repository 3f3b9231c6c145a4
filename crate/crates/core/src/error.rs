use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid quadrature request: {0}")]
    InvalidRule(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("problem too large for dense path: {size} unknowns exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("iterative norm computation did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time integration became unstable at step {step} (t = {time}, energy ratio {energy_ratio:e})")]
    Unstable {
        step: usize,
        time: f64,
        energy_ratio: f64,
    },

    #[error(
        "invalid CFL bracket: lower {lo} is {lo_state}, upper {hi} is {hi_state} \
         (need stable lower and unstable upper endpoint)"
    )]
    InvalidBracket {
        lo: f64,
        hi: f64,
        lo_state: &'static str,
        hi_state: &'static str,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

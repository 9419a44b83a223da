use thiserror::Error;

/// Errors raised by the resistance engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("node ({x}, {y}) is outside the {lx}x{ly} grid")]
    InvalidNode { x: i64, y: i64, lx: usize, ly: usize },

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions"
    )]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("degenerate theta factor: ln|theta| = {0}")]
    DegenerateTheta(f64),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

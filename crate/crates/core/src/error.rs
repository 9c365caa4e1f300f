use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site {x} outside the bulk 1..={max}")]
    SiteOutOfRange { x: i64, max: usize },

    #[error("block window [{lo}, {hi}] exits the bulk 1..={max}")]
    WindowOutOfRange { lo: i64, hi: i64, max: usize },

    #[error("evaluation point {0} must lie strictly inside (0,1)")]
    BoundarySingularity(f64),

    #[error("initial profile takes value {0} outside [0,1]")]
    ProfileOutOfRange(f64),

    #[error("extrapolation did not converge: {0}")]
    NonConvergent(String),

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("test function not admissible: {0}")]
    InadmissibleTestFunction(String),

    #[error("replica sample grids do not match")]
    MismatchedGrids,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

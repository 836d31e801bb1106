use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh generation failed: {0}")]
    Triangulation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown region tag {0}")]
    UnknownRegion(u32),

    #[error("matrix is not positive definite on the free subspace ({0})")]
    NotPositiveDefinite(String),

    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.1e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("Neumann series did not reach tolerance after {iterations} iterations (last residual ratio {ratio:.4})")]
    SeriesDiverged { iterations: usize, ratio: f64 },

    #[error("data incompatible with the homogeneous problem: sum of cotrace coefficients is {0:.3e}, expected 0")]
    Compatibility(f64),

    #[error("field is not discretely harmonic on the {side} side (relative residual {residual:.3e})")]
    NotHarmonic { side: &'static str, residual: f64 },

    #[error("point ({x}, {y}) is not strictly inside a triangle of the {side} side")]
    PointLocation { x: f64, y: f64, side: &'static str },

    #[error("point ({x}, {y}) is too close to the interface for kernel quadrature (distance {distance:.3e})")]
    TooClose { x: f64, y: f64, distance: f64 },

    #[error("operator check failed: {0}")]
    OperatorCheck(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

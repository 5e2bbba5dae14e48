use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at grid point {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("potential has negative entry {value} at index {index}")]
    NegativePotential { index: usize, value: f64 },

    #[error("potential {name} is singular at {point:?}")]
    Singular { name: String, point: Vec<f64> },

    #[error("imaginary residue {residue:e} exceeds threshold (relative to {scale:e})")]
    ImaginaryResidue { residue: f64, scale: f64 },

    #[error("dense oracle needs {points} points, cap is {cap}")]
    DenseCap { points: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("matrix function is not finite at eigenvalue {0}")]
    NonFiniteFunction(f64),

    #[error("quadrature tolerance {tol:e} unreachable within {max_panels} panels (worst error {worst:e})")]
    QuadratureUnreachable { tol: f64, max_panels: usize, worst: f64 },

    #[error("invalid spectral range [{0}, {1}]")]
    SpectralRange(f64, f64),

    #[error("operator is singular: {0}")]
    SingularOperator(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("{path}: {source}")]
    Path {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

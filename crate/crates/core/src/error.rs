//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} outside the supported range 1..=16")]
    DimensionOutOfRange(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps for matrix {matrix}")]
    EigenNonConvergence { sweeps: usize, matrix: String },

    #[error("directional cone has no generator set; build it with an orthant, halfspace or simplicial constructor")]
    MissingGenerators,

    #[error("no interior witness: {0}")]
    NoInteriorWitness(String),

    #[error("unsupported cone: {0}")]
    UnsupportedCone(String),

    #[error("domain does not fit the finite-radius cone: {0}")]
    RadiusDichotomy(String),

    #[error("no strict approximator template: {0}")]
    NoApproximator(String),

    #[error("hyperbolicity violated at p = {witness:?}: {detail}")]
    HyperbolicityViolation { witness: Vec<f64>, detail: String },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("jet window holds {0} jets, at least 100 are required")]
    WindowTooSmall(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("operator construction failed: {0}")]
    Operator(String),

    #[error("structural precheck ({condition}) failed: {detail}")]
    Precheck { condition: String, detail: String },

    #[error("input rejected at screening: {0}")]
    Screening(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by mesh construction, assembly and the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid coefficient data: {0}")]
    InvalidCoefficient(String),

    #[error("coefficient value {value} at ({x}, {y}) outside declared bounds [{min}, {max}]")]
    BoundViolation {
        x: f64,
        y: f64,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("field has no derivative data (piecewise-constant family); S-function unsupported")]
    UnsupportedFamily,

    #[error("singular corrector system for node {node}, element {element}, m = {m}")]
    SingularCorrector {
        node: usize,
        element: usize,
        m: usize,
    },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("problem size {dofs} fine dofs exceeds cap {cap}")]
    TooLarge { dofs: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

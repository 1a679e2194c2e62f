use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("label rule references a non-boundary face: cell ({i},{j}) direction {dir}")]
    NotABoundaryFace { i: i64, j: i64, dir: String },

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("incompatible data: component outside {subspace} has relative size {defect:.3e} (tolerance {tolerance:.1e})")]
    Compatibility {
        subspace: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("forbidden composition {label}: {reason}")]
    ForbiddenComposition { label: String, reason: String },

    #[error("stencil reach: {0}")]
    StencilReach(String),

    #[error("singular normal matrix: {0}")]
    SingularNormal(String),

    #[error("kernel computation failed: {0}")]
    Kernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid torus geometry: major radius {major} must exceed minor radius {minor} > 0")]
    InvalidGeometry { major: f64, minor: f64 },

    #[error("degenerate alignment: viewing directions are antipodal, in-plane angle undefined")]
    DegenerateAlignment,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error("eigensolver did not converge for frequency {k} after {iterations} matrix-vector products (max residual {max_residual:.3e}, tolerance {tol:.1e})")]
    Convergence {
        k: u32,
        iterations: usize,
        max_residual: f64,
        tol: f64,
        residuals: Vec<f64>,
    },

    #[error("degenerate embedding: node {node} has zero feature norm")]
    DegenerateEmbedding { node: usize },

    #[error("undefined alignment: alignment sequence is identically zero")]
    UndefinedAlignment,

    #[error("unsupported manifold: {0}")]
    UnsupportedManifold(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

use thiserror::Error;

/// Errors raised anywhere in the selection pipeline.
#[derive(Debug, Error)]
pub enum UdsError {
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("SVD did not converge for a {rows}x{cols} matrix (row-norm ratio {condition_hint:.3e})")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        condition_hint: f64,
    },

    #[error("projection bound violated: {0}")]
    ProjectionBound(String),

    #[error("dense oracle size guard exceeded: N*V = {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scorer {scorer} requires side input `{input}`")]
    MissingSideInput { scorer: String, input: String },

    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },

    #[error("sample {0} has no target positions")]
    EmptyTargets(String),

    #[error("non-finite {what}")]
    NonFiniteUpdate { what: String },

    #[error("step {step}, sample {sample}: {source}")]
    Step {
        step: usize,
        sample: String,
        #[source]
        source: Box<UdsError>,
    },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UdsError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} out of range (supported: 1, 2, 3)")]
    Dimension(usize),
    #[error("depth {0} out of range (must be at least 1)")]
    Depth(u32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("memory cap exceeded: grid needs {cells} leaf cells, cap is {cap}")]
    MemoryCap { cells: u128, cap: usize },
    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,
    #[error("non-finite value {value} at cell {cell}")]
    NonFinite { cell: usize, value: f64 },
    #[error("negative value {value} at cell {cell}; grid functions hold |f|")]
    Negative { cell: usize, value: f64 },
    #[error("sampler is not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("parameter `{name}` = {value} violates {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },
    #[error("instance too large for the brute-force oracle: {0}")]
    TooLarge(String),
    #[error("shape does not fit inside the grid root: {0}")]
    ShapeOutsideRoot(String),
    #[error("mean-value ball contains no domain cell")]
    EmptyBall,
    #[error("support of the sampled function reaches the domain boundary margin")]
    SupportTouchesBoundary,
    #[error("interpolation tail criterion unreachable: {0}")]
    TailCriterion(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for a named parameter constraint violation.
pub(crate) fn param(name: &'static str, value: f64, constraint: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        value,
        constraint: constraint.into(),
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported group descriptor `{0}`")]
    UnsupportedGroup(String),
    #[error("no irreducible representation table for group {0}")]
    NoIrreps(String),
    #[error("invalid cocycle on {group}: residual {residual:.3e}")]
    InvalidCocycle { group: String, residual: f64 },
    #[error("unknown cocycle `{name}` for group {group}")]
    UnknownCocycle { name: String, group: String },
    #[error("not a subgroup of {group}: {reason}")]
    NotSubgroup { group: String, reason: String },
    #[error("site mismatch: {0}")]
    SiteMismatch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("input is not symmetric: {check} residual {residual:.3e}")]
    NotSymmetric { check: String, residual: f64 },
    #[error("gauging produced the zero state ({0})")]
    ZeroState(String),
    #[error("state dimension {required} exceeds the envelope {limit}")]
    Envelope { required: u128, limit: u128 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("element {element} is not in the boundary subgroup")]
    NotInSubgroup { element: usize },
    #[error("representation check failed: {0}")]
    Representation(String),
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

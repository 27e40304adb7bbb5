use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({b1}, {b2}, {b3}, {b4}): {reason}")]
    InvalidBox {
        b1: f64,
        b2: f64,
        b3: f64,
        b4: f64,
        reason: &'static str,
    },

    #[error("invalid vehicle class code {0} (expected 1..=4)")]
    InvalidClass(u8),

    #[error("duplicate track id {0} in scene")]
    DuplicateTrack(u32),

    #[error("scene has {count} vehicles, message framing allows at most {max}")]
    TooManyVehicles { count: usize, max: usize },

    #[error("malformed semantic message: {0}")]
    Decode(String),

    #[error("layout dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape: {0}")]
    InputShape(String),

    #[error("singular system: pivot {pivot} below {threshold:e}")]
    Singular { pivot: usize, threshold: f64 },

    #[error("numerical trouble: {0}")]
    NumericalTrouble(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("polynomial of degree {degree} exceeds relaxation level {level} (max degree {max})")]
    LevelTooHigh { degree: u32, level: u32, max: u32 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("logic error: {0}")]
    Logic(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

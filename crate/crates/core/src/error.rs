use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies outside the Bloch ball (norm {norm})")]
    OutsideBall { norm: f64 },

    #[error("closed-form cycles are only available up to period 2, got {0}")]
    UnsupportedPeriod(usize),

    #[error("post-selection failed: projected state has zero norm")]
    Discarded,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse point `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

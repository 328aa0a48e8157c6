use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state {0:?}")]
    NonFinite(Vec<f64>),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_state: Vec<f64>,
    },

    #[error("no separatrix detected: {0}")]
    NoSeparatrix(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("patch {patch}: {reason}")]
    Factorization { patch: usize, reason: String },

    #[error("point {0:?} lies outside every patch")]
    OutsideCover(Vec<f64>),

    #[error("kernel: {0}")]
    Kernel(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

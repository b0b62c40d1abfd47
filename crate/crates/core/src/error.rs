use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} outside supported range (max {max})")]
    Range { index: usize, max: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("basis mismatch: K = {left} vs K = {right}")]
    BasisMismatch { left: usize, right: usize },

    #[error("unsupported coefficient convention {0:?}")]
    Convention(String),

    #[error("unknown innovation {0:?}")]
    UnknownInnovation(String),

    #[error("window search exceeded cap: {0}")]
    WindowCap(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

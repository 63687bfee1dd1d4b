use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("query point has zero probability")]
    ZeroProbability,
}

pub type Result<T> = core::result::Result<T, Error>;

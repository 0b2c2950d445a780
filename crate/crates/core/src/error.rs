use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("model is not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("no events in the data; the endpoint model cannot be fitted")]
    NoEvents,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("optimization failed: {0}")]
    Optimization(String),
}

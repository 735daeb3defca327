use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid side length must be even and at least 2, got {0}")]
    InvalidSide(usize),
    #[error("cell value {0} is not a bit")]
    InvalidCell(u8),
    #[error("density {0} is outside [0, 1]")]
    InvalidDensity(f64),
    #[error("backward stepping is undefined under zero-pad/crop edge handling")]
    IrreversibleEdge,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("forward cache does not match the network")]
    MissingCache,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

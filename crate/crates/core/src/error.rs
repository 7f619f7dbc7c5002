use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid index {index} outside window [{lo}, {hi}]")]
    OutOfWindow { index: i64, lo: i64, hi: i64 },
    #[error("mismatched grids: {0}")]
    GridMismatch(String),
    #[error("construction mismatch: {0}")]
    ConstructionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

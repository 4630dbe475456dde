use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no uncensored observations; effective sample size is zero")]
    NoEvents,

    #[error("censoring calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

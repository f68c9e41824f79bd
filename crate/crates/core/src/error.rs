use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("dimension {0} is not a power of two between 2 and 16")]
    BadDimension(usize),

    #[error("spin index {spin} out of range for a {n}-spin register")]
    SpinIndex { spin: usize, n: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("oscillator level {0} outside 0..=3")]
    LevelOutOfRange(usize),

    #[error("purity factor {0} outside (0, 1/4]")]
    PurityOutOfRange(f64),

    #[error("controlled operations {0} and {1} do not commute")]
    NonCommuting(usize, usize),

    #[error("reference signal {signal:e} below threshold {threshold:e}")]
    DegenerateReference { signal: f64, threshold: f64 },

    #[error("negative duration {0} s")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum FodpError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("memory weights require at least one buffered release")]
    EmptyBuffer,

    #[error("invalid Renyi order {0}; integer orders > 1 are required")]
    InvalidOrder(f64),

    #[error("accounting grids do not match: {left} vs {right} orders")]
    GridMismatch { left: usize, right: usize },

    #[error("empty accounting grid")]
    EmptyGrid,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset too large for neighbor enumeration: {n} examples (limit {limit})")]
    EnumerationTooLarge { n: usize, limit: usize },

    #[error("transcript lacks retained noise/query fields; rerun with a full trace")]
    TranscriptNotFull,

    #[error("data format error: {0}")]
    DataFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FodpError>;

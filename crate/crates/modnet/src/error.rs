use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("graph validation failed: {0}")]
    InvalidGraph(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("sample too small: need at least {need} values, got {got}")]
    SampleSize { need: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error("export error: {0}")]
    Export(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

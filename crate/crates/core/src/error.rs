use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("cell ({x}, {y}) is outside a {ex}x{ey} grid")]
    OutOfRange { x: usize, y: usize, ex: usize, ey: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("distribution at cell {cell} sums to {sum}, not 1")]
    NotNormalized { cell: usize, sum: f64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("word id {word} out of range for vocabulary of size {vocab}")]
    WordOutOfRange { word: usize, vocab: usize },
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("classification: {0}")]
    Classification(String),
    #[error("image: {0}")]
    Image(String),
    #[error("vocabulary hash mismatch: model {model:016x}, corpus {corpus:016x}")]
    VocabMismatch { model: u64, corpus: u64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

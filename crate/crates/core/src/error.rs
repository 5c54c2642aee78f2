use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("periods r = {r} ms and h = {h} ms are not representable on the {grid_ms} ms grid")]
    Incommensurable { r: f64, h: f64, grid_ms: f64 },

    #[error("cycle length mismatch: {left} vs {right}")]
    CycleLengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("reference data, line {line}: {msg}")]
    Reference { line: u64, msg: String },

    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

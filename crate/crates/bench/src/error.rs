use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ggm_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("non-positive price {value} at row {row}, column {col}")]
    NonPositivePrice { row: usize, col: usize, value: f64 },

    #[error("row {row} has {got} columns, expected {expected}")]
    ColumnCountMismatch { row: usize, expected: usize, got: usize },

    #[error("insufficient rows: {0}")]
    InsufficientRows(String),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("ambiguous walking direction: net midhip displacement {displacement_px:.3} px")]
    AmbiguousDirection { displacement_px: f64 },
    #[error("degenerate calibration: markers share x = {x}")]
    DegenerateCalibration { x: f64 },
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("class {class:?} has {rows} rows, fewer than {folds} folds")]
    Stratification {
        class: String,
        rows: usize,
        folds: usize,
    },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("wire protocol error: {0}")]
    Wire(#[from] crate::stream::WireError),
}

use std::io;
use std::path::Path;

use gaitguard_core::stream::WireError;

/// Command-level error. Everything except I/O failures is a validation
/// error (exit code 1); I/O failures exit with 2.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{detail}")]
    Validation { code: &'static str, detail: String },
    #[error("{detail}")]
    Io { code: &'static str, detail: String },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn validation(code: &'static str, detail: impl Into<String>) -> Self {
        AppError::Validation {
            code,
            detail: detail.into(),
        }
    }

    pub fn io(code: &'static str, detail: impl Into<String>) -> Self {
        AppError::Io {
            code,
            detail: detail.into(),
        }
    }

    /// Wraps an I/O error with the path it concerns.
    pub fn at(path: &Path, err: io::Error) -> Self {
        AppError::io("io", format!("{}: {err}", path.display()))
    }

    pub fn code(&self) -> &'static str {
        match self {
            AppError::Validation { code, .. } | AppError::Io { code, .. } => code,
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            AppError::Validation { detail, .. } | AppError::Io { detail, .. } => detail,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation { .. } => 1,
            AppError::Io { .. } => 2,
        }
    }

    /// `{"error": code, "detail": text}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.code(), "detail": self.detail() }).to_string()
    }
}

impl From<gaitguard_core::Error> for AppError {
    fn from(e: gaitguard_core::Error) -> Self {
        use gaitguard_core::Error as E;
        let code = match &e {
            E::Validation(_) => "validation",
            E::InsufficientData(_) => "insufficient_data",
            E::AmbiguousDirection { .. } => "ambiguous_direction",
            E::DegenerateCalibration { .. } => "degenerate_calibration",
            E::DegenerateDataset(_) => "degenerate_dataset",
            E::Stratification { .. } => "stratification",
            E::Shape { .. } => "shape",
            E::UndefinedMetric(_) => "undefined_metric",
            E::Config(_) => "config",
            E::Wire(w) => w.code(),
        };
        AppError::validation(code, e.to_string())
    }
}

impl From<WireError> for AppError {
    fn from(e: WireError) -> Self {
        AppError::validation(e.code(), e.to_string())
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        AppError::io("io", e.to_string())
    }
}

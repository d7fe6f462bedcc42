//! On-disk formats.

pub mod features;
pub mod frames;
pub mod keypoints;
pub mod regions;
pub mod reports;

use std::fs;
use std::path::Path;

use crate::error::{AppError, AppResult};

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| AppError::at(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::at(path, e))
}

/// Parses a JSON file into `T`; syntax and schema problems are validation
/// errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::at(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::validation("parse", format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

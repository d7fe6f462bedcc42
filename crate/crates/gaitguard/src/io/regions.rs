//! Region files: one JSON record per frame,
//! `{"frame_id", "boxes": [{"x","y","w","h"}], "keypoints": {...}}`.

use std::collections::BTreeMap;
use std::path::Path;

use gaitguard_core::mitigate::RegionRecord;

use crate::error::{AppError, AppResult};

pub type RegionMap = BTreeMap<u32, RegionRecord>;

pub fn parse_regions(text: &str) -> AppResult<RegionMap> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RegionRecord = serde_json::from_str(line)
            .map_err(|e| AppError::validation("parse", format!("line {}: {e}", i + 1)))?;
        let id = rec.frame_id;
        if out.insert(id, rec).is_some() {
            return Err(AppError::validation(
                "validation",
                format!("line {}: duplicate frame_id {id}", i + 1),
            ));
        }
    }
    Ok(out)
}

pub fn read_regions(path: &Path) -> AppResult<RegionMap> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::at(path, e))?;
    parse_regions(&text)
}

pub fn format_regions<'a>(records: impl IntoIterator<Item = &'a RegionRecord>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("region serializes"));
        out.push('\n');
    }
    out
}

pub fn write_regions<'a>(path: &Path, records: impl IntoIterator<Item = &'a RegionRecord>) -> AppResult<()> {
    super::write_file(path, format_regions(records).as_bytes())
}

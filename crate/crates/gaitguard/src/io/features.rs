//! Gait feature CSV: `subject_id,sequence_id,cycle_index` followed by the
//! ten feature columns. An empty cell is an absent feature.

use std::path::Path;

use gaitguard_core::gait::{GaitFeatureRow, FEATURE_NAMES};

use crate::error::{AppError, AppResult};

pub fn format_features_csv(rows: &[GaitFeatureRow]) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject_id", "sequence_id", "cycle_index"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![r.subject_id.clone(), r.sequence_id.clone(), r.cycle_index.to_string()];
        rec.extend(r.values().iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| AppError::io("io", e.to_string()))
}

pub fn write_features_csv(path: &Path, rows: &[GaitFeatureRow]) -> AppResult<()> {
    super::write_file(path, &format_features_csv(rows)?)
}

fn csv_error(e: csv::Error) -> AppError {
    if e.is_io_error() {
        AppError::io("io", e.to_string())
    } else {
        AppError::validation("parse", e.to_string())
    }
}

/// Parses feature rows. Feature columns missing from the header read as
/// absent; unknown columns are ignored.
pub fn parse_features_csv(bytes: &[u8]) -> AppResult<Vec<GaitFeatureRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers().map_err(csv_error)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| AppError::validation("parse", format!("feature CSV lacks a {name} column")))
    };
    let (subj, seq, cyc) = (required("subject_id")?, required("sequence_id")?, required("cycle_index")?);
    let feature_cols: Vec<Option<usize>> = FEATURE_NAMES.iter().map(|n| col(n)).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_error)?;
        let bad = |what: &str, v: &str| AppError::validation("parse", format!("line {line}: bad {what} {v:?}"));
        let cycle_index = rec[cyc].trim().parse::<u32>().map_err(|_| bad("cycle_index", &rec[cyc]))?;
        let mut values = [None; 10];
        for (k, c) in feature_cols.iter().enumerate() {
            let Some(c) = c else { continue };
            let cell = rec.get(*c).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| bad(FEATURE_NAMES[k], cell))?;
            if !v.is_finite() {
                return Err(bad(FEATURE_NAMES[k], cell));
            }
            values[k] = Some(v);
        }
        rows.push(GaitFeatureRow::from_values(
            rec[subj].to_string(),
            rec[seq].to_string(),
            cycle_index,
            values,
        ));
    }
    Ok(rows)
}

pub fn read_features_csv(path: &Path) -> AppResult<Vec<GaitFeatureRow>> {
    let bytes = std::fs::read(path).map_err(|e| AppError::at(path, e))?;
    parse_features_csv(&bytes)
}

/// Number of present scalar feature values.
pub fn scalar_feature_count(rows: &[GaitFeatureRow]) -> usize {
    rows.iter().map(|r| r.present_count()).sum()
}

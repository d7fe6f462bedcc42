use std::path::PathBuf;

use serde_json::json;

use gaitguard_core::gait::extract_features;
use gaitguard_core::keypoint::{meters_per_pixel, MarkerCalibration};

use super::args::ExtractArgs;
use super::{emit, Ctx};
use crate::error::{AppError, AppResult};
use crate::io::features::{scalar_feature_count, write_features_csv};
use crate::io::keypoints::read_keypoint_sequence;

/// Expands directories to their `*.jsonl` files, sorted.
fn sequence_files(inputs: &[PathBuf]) -> AppResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| AppError::at(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl") && !f.to_string_lossy().ends_with(".regions.jsonl"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn run(a: ExtractArgs, ctx: &Ctx) -> AppResult<()> {
    let cal = match (a.marker_a, a.marker_b, a.marker_distance) {
        (Some(x), Some(y), Some(d)) => {
            let cal = MarkerCalibration::new(x, y, d);
            meters_per_pixel(&cal)?;
            Some(cal)
        }
        _ => None,
    };
    let params = a.events.params();
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let files = sequence_files(&a.input)?;
    for path in &files {
        let seq = read_keypoint_sequence(path)?;
        match extract_features(&seq, cal.as_ref(), &params) {
            Ok(report) if report.rejected => {
                let reason = report.rejection_reason.unwrap_or_default();
                log::warn!("{}: rejected: {reason}", path.display());
                rejected.push(json!({ "sequence_id": seq.sequence_id, "reason": reason }));
            }
            Ok(report) => rows.extend(report.rows),
            Err(e) => {
                log::warn!("{}: rejected: {e}", path.display());
                rejected.push(json!({ "sequence_id": seq.sequence_id, "reason": e.to_string() }));
            }
        }
    }
    let out = ctx.out(&a.out);
    write_features_csv(&out, &rows)?;
    let subjects: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    let scalars = scalar_feature_count(&rows);
    emit(&json!({
        "sequences": files.len(),
        "rows": rows.len(),
        "subjects": subjects.len(),
        "scalar_features": scalars,
        "mean_scalar_features_per_subject": if subjects.is_empty() { 0.0 } else { scalars as f64 / subjects.len() as f64 },
        "rejected": rejected,
        "out": out,
    }))
}

//! Keypoint sequence files: one JSON header line, then one JSON object per
//! frame.

use std::fs;
use std::path::Path;

use gaitguard_core::keypoint::{KeypointFrame, KeypointSequence, SequenceHeader};

use crate::error::{AppError, AppResult};

fn parse_error(line: usize, detail: impl std::fmt::Display) -> AppError {
    AppError::validation("parse", format!("line {line}: {detail}"))
}

/// Parses and validates a sequence from file contents. Blank lines are
/// skipped; frames come back sorted by index.
pub fn parse_keypoint_sequence(text: &str) -> AppResult<KeypointSequence> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines
        .next()
        .ok_or_else(|| AppError::validation("parse", "empty keypoint file"))?;
    let value: serde_json::Value = serde_json::from_str(first).map_err(|e| parse_error(n, e))?;
    if value.get("fps").is_none() {
        return Err(AppError::validation("validation", "header has no fps"));
    }
    let header: SequenceHeader = serde_json::from_value(value).map_err(|e| parse_error(n, e))?;
    let mut frames = Vec::new();
    for (n, line) in lines {
        let frame: KeypointFrame = serde_json::from_str(line).map_err(|e| parse_error(n, e))?;
        frames.push(frame);
    }
    let seq = KeypointSequence {
        subject_id: header.subject_id,
        sequence_id: header.sequence_id,
        fps: header.fps,
        frames,
    };
    Ok(seq.validated()?)
}

pub fn read_keypoint_sequence(path: &Path) -> AppResult<KeypointSequence> {
    let text = fs::read_to_string(path).map_err(|e| AppError::at(path, e))?;
    parse_keypoint_sequence(&text).map_err(|e| match e {
        AppError::Validation { code, detail } => AppError::validation(code, format!("{}: {detail}", path.display())),
        other => other,
    })
}

/// Canonical text of a sequence: compact JSON, one line each, trailing
/// newline.
pub fn format_keypoint_sequence(seq: &KeypointSequence) -> String {
    let mut out = serde_json::to_string(&seq.header()).expect("header serializes");
    out.push('\n');
    for f in &seq.frames {
        out.push_str(&serde_json::to_string(f).expect("frame serializes"));
        out.push('\n');
    }
    out
}

pub fn write_keypoint_sequence(path: &Path, seq: &KeypointSequence) -> AppResult<()> {
    super::write_file(path, format_keypoint_sequence(seq).as_bytes())
}

//! Frame rasters on disk: PNG (RGB8), or raw `.rgb` bytes with a JSON
//! sidecar `{"width", "height"}` that may also carry `frame_id` and
//! `timestamp_us`.
//!
//! A frame's id is the trailing number of its file stem (`frame_000012.png`
//! is frame 12), else its position in the sorted directory listing. Without
//! a timestamp in the sidecar, `timestamp_us = frame_id * 1e6 / fps`.

use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use gaitguard_core::keypoint::Frame;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    Png,
    Rgb,
}

impl FrameFormat {
    pub fn of(path: &Path) -> Option<FrameFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(FrameFormat::Png),
            "rgb" => Some(FrameFormat::Rgb),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            FrameFormat::Png => "png",
            FrameFormat::Rgb => "rgb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_us: Option<u64>,
}

/// A frame read from disk with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFile {
    pub path: PathBuf,
    pub format: FrameFormat,
    pub frame: Frame,
}

/// Default file stem of a frame.
pub fn frame_stem(frame_id: u32) -> String {
    format!("frame_{frame_id:06}")
}

fn trailing_number(stem: &str) -> Option<u32> {
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn read_sidecar(path: &Path) -> AppResult<Option<FrameSidecar>> {
    let p = sidecar_path(path);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).map_err(|e| AppError::at(&p, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| AppError::validation("parse", format!("{}: {e}", p.display())))
}

/// Reads one frame file. `position` is the fallback frame id.
pub fn read_frame_file(path: &Path, position: u32, fps: f64) -> AppResult<FrameFile> {
    let format = FrameFormat::of(path)
        .ok_or_else(|| AppError::validation("format", format!("{}: not a .png or .rgb file", path.display())))?;
    let sidecar = read_sidecar(path)?;
    let stem_id = path.file_stem().and_then(|s| s.to_str()).and_then(trailing_number);
    let frame_id = sidecar.and_then(|s| s.frame_id).or(stem_id).unwrap_or(position);
    let timestamp_us = sidecar
        .and_then(|s| s.timestamp_us)
        .unwrap_or_else(|| (frame_id as f64 * 1e6 / fps).round() as u64);
    let (width, height, pixels) = match format {
        FrameFormat::Png => {
            let img = image::open(path)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => AppError::at(path, io),
                    other => AppError::validation("decode", format!("{}: {other}", path.display())),
                })?
                .to_rgb8();
            (img.width(), img.height(), img.into_raw())
        }
        FrameFormat::Rgb => {
            let sc = sidecar.ok_or_else(|| {
                AppError::validation("format", format!("{}: raw frame needs a .json sidecar", path.display()))
            })?;
            let bytes = fs::read(path).map_err(|e| AppError::at(path, e))?;
            (sc.width, sc.height, bytes)
        }
    };
    let frame = Frame::new(frame_id, width, height, timestamp_us, pixels)
        .map_err(|e| AppError::validation("shape", format!("{}: {e}", path.display())))?;
    Ok(FrameFile {
        path: path.to_path_buf(),
        format,
        frame,
    })
}

/// Reads a single frame file or every `.png`/`.rgb` file of a directory in
/// name order.
pub fn read_frames(input: &Path, fps: f64) -> AppResult<Vec<FrameFile>> {
    let meta = fs::metadata(input).map_err(|e| AppError::at(input, e))?;
    if meta.is_file() {
        return Ok(vec![read_frame_file(input, 0, fps)?]);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| AppError::at(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && FrameFormat::of(p).is_some())
        .collect();
    paths.sort();
    let files = paths
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame_file(p, i as u32, fps))
        .collect::<AppResult<Vec<_>>>()?;
    let mut ids: Vec<u32> = files.iter().map(|f| f.frame.frame_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(AppError::validation(
            "validation",
            format!("{}: two files map to frame_id {}", input.display(), w[0]),
        ));
    }
    Ok(files)
}

pub fn encode_png(frame: &Frame) -> AppResult<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&frame.pixels, frame.width, frame.height, ExtendedColorType::Rgb8)
        .map_err(|e| AppError::validation("encode", e.to_string()))?;
    Ok(out)
}

/// Writes `frame` as `<dir>/<stem>.<ext>`; raw frames also get a sidecar.
/// Returns the raster path.
pub fn write_frame(dir: &Path, stem: &str, frame: &Frame, format: FrameFormat) -> AppResult<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        FrameFormat::Png => super::write_file(&path, &encode_png(frame)?)?,
        FrameFormat::Rgb => {
            super::write_file(&path, &frame.pixels)?;
            let sc = FrameSidecar {
                width: frame.width,
                height: frame.height,
                frame_id: Some(frame.frame_id),
                timestamp_us: Some(frame.timestamp_us),
            };
            let json = serde_json::to_string(&sc).expect("sidecar serializes");
            super::write_file(&sidecar_path(&path), json.as_bytes())?;
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(id: u32) -> Frame {
        let mut f = Frame::filled(id, 5, 4, [10, 20, 30]);
        f.set_pixel(1, 2, [255, 0, 7]);
        f.timestamp_us = 1234;
        f
    }

    #[test]
    fn png_and_raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "frame_000003", &frame(3), FrameFormat::Png).unwrap();
        write_frame(dir.path(), "frame_000004", &frame(4), FrameFormat::Rgb).unwrap();
        let got = read_frames(dir.path(), 30.0).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].format, FrameFormat::Png);
        assert_eq!(got[0].frame.pixels, frame(3).pixels);
        assert_eq!(got[0].frame.frame_id, 3);
        assert_eq!(got[0].frame.timestamp_us, 100_000);
        assert_eq!(got[1].frame, frame(4));
    }

    #[test]
    fn raw_without_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rgb");
        fs::write(&p, [0u8; 12]).unwrap();
        assert_eq!(read_frames(&p, 30.0).unwrap_err().exit_code(), 1);
        assert_eq!(read_frames(&dir.path().join("nope"), 30.0).unwrap_err().exit_code(), 2);
    }
}

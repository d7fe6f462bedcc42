//! Region-targeted noise masking of RGB frames.
//!
//! Two masking approaches are supported: keypoint-based masking (KPM) puts a
//! square patch of noise around the MidHip and both ankles; lower-body
//! masking (LBM) covers the bottom half of the person box. Noise is additive,
//! independent per pixel and channel, shaped vertically by a Hann window the
//! height of each masked rectangle, and clamped to `[0, 255]`.
//!
//! The noise stream of a call is seeded from `(config.seed, frame_id)`, so
//! mitigation is a pure function of its inputs.

mod noise;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use noise::{sample_noise, Distribution, NoiseSampler};
pub(crate) use noise::unit_open;

use crate::keypoint::{Frame, Joint};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Kpm,
    Lbm,
}

impl Approach {
    pub const ALL: [Approach; 2] = [Approach::Kpm, Approach::Lbm];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Kpm => "kpm",
            Approach::Lbm => "lbm",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kpm" => Ok(Approach::Kpm),
            "lbm" => Ok(Approach::Lbm),
            other => Err(Error::Config(format!("unknown approach {other:?}"))),
        }
    }
}

pub const DEFAULT_KPM_PATCH_PX: u32 = 48;

fn default_patch() -> u32 {
    DEFAULT_KPM_PATCH_PX
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub approach: Approach,
    pub distribution: Distribution,
    pub lambda: f64,
    #[serde(default = "default_patch")]
    pub kpm_patch_px: u32,
    #[serde(default)]
    pub seed: u64,
    /// When false, frames pass through untouched.
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::laplace_150()
    }
}

impl NoiseConfig {
    pub fn new(approach: Approach, distribution: Distribution, lambda: f64, seed: u64) -> Self {
        NoiseConfig {
            approach,
            distribution,
            lambda,
            kpm_patch_px: DEFAULT_KPM_PATCH_PX,
            seed,
            enabled: true,
        }
    }

    /// LBM with Laplace noise at lambda 150.
    pub fn laplace_150() -> Self {
        NoiseConfig::new(Approach::Lbm, Distribution::Laplace, 150.0, 0)
    }

    /// LBM with exponential noise at lambda 100.
    pub fn exponential_100() -> Self {
        NoiseConfig::new(Approach::Lbm, Distribution::Exponential, 100.0, 0)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "laplace-150" => Ok(Self::laplace_150()),
            "exponential-100" => Ok(Self::exponential_100()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn disabled() -> Self {
        NoiseConfig {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.approach == Approach::Kpm && self.kpm_patch_px < 1 {
            return Err(Error::Config("kpm_patch_px must be >= 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned person box in pixels; may extend past the frame edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersonRegion {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl PersonRegion {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        PersonRegion { x, y, w, h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// Per-frame targets: full-body boxes and, optionally, keypoints by joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub frame_id: u32,
    #[serde(default)]
    pub boxes: Vec<PersonRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<BTreeMap<Joint, KeypointRecord>>,
}

impl RegionRecord {
    /// Present KPM targets (MidHip, LAnkle, RAnkle) in that order.
    pub fn kpm_targets(&self) -> Vec<(f64, f64)> {
        let Some(kps) = &self.keypoints else { return Vec::new() };
        [Joint::MidHip, Joint::LAnkle, Joint::RAnkle]
            .iter()
            .filter_map(|j| kps.get(j))
            .filter(|k| k.confidence > 0.0)
            .map(|k| (k.x, k.y))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitigationStatus {
    /// Noise was drawn for this many pixels.
    Applied { pixels: usize },
    Disabled,
    /// Nothing to mask; the frame is returned unchanged.
    NoTarget(&'static str),
}

/// Bottom half of a box: `(x, y + ceil(h/2), w, h - ceil(h/2))`. A box of
/// height 1 maps to itself.
pub fn lower_half(region: &PersonRegion) -> PersonRegion {
    if region.h <= 1 {
        return *region;
    }
    let top = region.h.div_ceil(2);
    PersonRegion {
        x: region.x,
        y: region.y + top as i32,
        w: region.w,
        h: region.h - top,
    }
}

/// Hann window of length `n`: `0.5 * (1 - cos(2 pi i / (n - 1)))`, and
/// `[1.0]` for `n == 1`. Computed symmetrically so both ends are exactly 0.
pub fn hanning_window(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![1.0],
        _ => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let k = i.min(n - 1 - i) as f64;
                    0.5 * (1.0 - math::cos(2.0 * PI * k / denom))
                })
                .collect()
        }
    }
}

/// Half-open pixel rectangle inside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl Rect {
    fn clip(x: i64, y: i64, w: i64, h: i64, frame: &Frame) -> Option<Rect> {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w).min(frame.width as i64);
        let y1 = (y + h).min(frame.height as i64);
        (x1 > x0 && y1 > y0).then_some(Rect {
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
        })
    }

    fn of_region(r: &PersonRegion, frame: &Frame) -> Option<Rect> {
        Rect::clip(r.x as i64, r.y as i64, r.w as i64, r.h as i64, frame)
    }

    #[inline]
    fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[inline]
fn frame_seed(cfg: &NoiseConfig, frame: &Frame) -> u64 {
    math::derive_seed(cfg.seed, frame.frame_id as u64)
}

/// Adds windowed noise over the union of `rects`. Union pixels are visited
/// row-major over the union's bounding box, three samples per pixel in RGB
/// order; a pixel takes the window weight of the first rectangle covering it.
fn apply_windowed(frame: &Frame, rects: &[Rect], cfg: &NoiseConfig) -> (Frame, usize) {
    let mut out = frame.clone();
    if rects.is_empty() {
        return (out, 0);
    }
    let windows: Vec<Vec<f64>> = rects
        .iter()
        .map(|r| hanning_window((r.y1 - r.y0) as usize))
        .collect();
    let bx0 = rects.iter().map(|r| r.x0).min().unwrap_or(0);
    let by0 = rects.iter().map(|r| r.y0).min().unwrap_or(0);
    let bx1 = rects.iter().map(|r| r.x1).max().unwrap_or(0);
    let by1 = rects.iter().map(|r| r.y1).max().unwrap_or(0);
    let mut sampler = NoiseSampler::new(cfg.distribution, cfg.lambda, frame_seed(cfg, frame));
    let mut count = 0;
    for y in by0..by1 {
        for x in bx0..bx1 {
            let Some(k) = rects.iter().position(|r| r.contains(x, y)) else { continue };
            let weight = windows[k][(y - rects[k].y0) as usize];
            let i = out.index(x, y);
            for c in 0..3 {
                let noisy = out.pixels[i + c] as f64 + weight * sampler.sample();
                out.pixels[i + c] = math::round(noisy).clamp(0.0, 255.0) as u8;
            }
            count += 1;
        }
    }
    (out, count)
}

/// Lower-body masking for one full-body box.
pub fn apply_lbm(frame: &Frame, region: &PersonRegion, cfg: &NoiseConfig) -> (Frame, MitigationStatus) {
    lbm(frame, core::slice::from_ref(region), cfg)
}

fn lbm(frame: &Frame, regions: &[PersonRegion], cfg: &NoiseConfig) -> (Frame, MitigationStatus) {
    if !cfg.enabled {
        return (frame.clone(), MitigationStatus::Disabled);
    }
    let rects: Vec<Rect> = regions
        .iter()
        .filter_map(|r| Rect::of_region(&lower_half(r), frame))
        .collect();
    if rects.is_empty() {
        return (frame.clone(), MitigationStatus::NoTarget("region outside frame"));
    }
    let (out, pixels) = apply_windowed(frame, &rects, cfg);
    (out, MitigationStatus::Applied { pixels })
}

/// Keypoint masking: a `kpm_patch_px` square centred on each point.
pub fn apply_kpm(frame: &Frame, points: &[(f64, f64)], cfg: &NoiseConfig) -> (Frame, MitigationStatus) {
    if !cfg.enabled {
        return (frame.clone(), MitigationStatus::Disabled);
    }
    let side = cfg.kpm_patch_px as i64;
    let rects: Vec<Rect> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .filter_map(|&(x, y)| {
            let x0 = math::round(x) as i64 - side / 2;
            let y0 = math::round(y) as i64 - side / 2;
            Rect::clip(x0, y0, side, side, frame)
        })
        .collect();
    if rects.is_empty() {
        return (frame.clone(), MitigationStatus::NoTarget("no keypoints inside frame"));
    }
    let (out, pixels) = apply_windowed(frame, &rects, cfg);
    (out, MitigationStatus::Applied { pixels })
}

/// Mitigates one frame with whatever targets the record provides for the
/// configured approach.
pub fn mitigate_frame(frame: &Frame, record: Option<&RegionRecord>, cfg: &NoiseConfig) -> (Frame, MitigationStatus) {
    if !cfg.enabled {
        return (frame.clone(), MitigationStatus::Disabled);
    }
    let Some(record) = record else {
        return (frame.clone(), MitigationStatus::NoTarget("no region for frame"));
    };
    match cfg.approach {
        Approach::Lbm => lbm(frame, &record.boxes, cfg),
        Approach::Kpm => apply_kpm(frame, &record.kpm_targets(), cfg),
    }
}

/// `10 log10(sum original^2 / sum (mitigated - original)^2)` over the
/// region's in-frame pixels and all channels; `+inf` when nothing changed.
pub fn snr_db(original: &Frame, mitigated: &Frame, region: &PersonRegion) -> Result<f64> {
    if original.width != mitigated.width || original.height != mitigated.height {
        return Err(Error::Shape {
            expected: original.pixels.len(),
            got: mitigated.pixels.len(),
        });
    }
    let Some(r) = Rect::of_region(region, original) else {
        return Err(Error::Validation("SNR region does not intersect the frame".into()));
    };
    let mut signal = 0.0;
    let mut noise = 0.0;
    for y in r.y0..r.y1 {
        let a = original.index(r.x0, y);
        let b = original.index(r.x1 - 1, y) + 3;
        for (o, m) in original.pixels[a..b].iter().zip(&mitigated.pixels[a..b]) {
            let o = *o as f64;
            let d = *m as f64 - o;
            signal += o * o;
            noise += d * d;
        }
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(signal / noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lower_half_examples() {
        assert_eq!(lower_half(&PersonRegion::new(10, 20, 50, 100)), PersonRegion::new(10, 70, 50, 50));
        assert_eq!(lower_half(&PersonRegion::new(0, 0, 10, 1)), PersonRegion::new(0, 0, 10, 1));
        assert_eq!(lower_half(&PersonRegion::new(5, 7, 9, 11)), PersonRegion::new(5, 13, 9, 5));
    }

    #[test]
    fn hanning_examples() {
        assert_eq!(hanning_window(3), vec![0.0, 1.0, 0.0]);
        assert_eq!(hanning_window(1), vec![1.0]);
        let w = hanning_window(5);
        for (a, b) in w.iter().zip([0.0, 0.5, 1.0, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(w[0], 0.0);
        assert_eq!(w[4], 0.0);
    }

    #[test]
    fn snr_constant_offset() {
        let a = Frame::filled(0, 8, 8, [100; 3]);
        let b = Frame::filled(0, 8, 8, [110; 3]);
        let r = PersonRegion::new(2, 2, 4, 4);
        assert!((snr_db(&a, &b, &r).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(snr_db(&a, &a, &r).unwrap(), f64::INFINITY);
        let c = Frame::filled(0, 4, 8, [0; 3]);
        assert!(matches!(snr_db(&a, &c, &r), Err(Error::Shape { .. })));
    }

    #[test]
    fn kpm_clips_at_corner() {
        let f = Frame::filled(0, 100, 100, [128; 3]);
        let cfg = NoiseConfig::new(Approach::Kpm, Distribution::Uniform, 200.0, 1);
        let (out, status) = apply_kpm(&f, &[(0.0, 0.0)], &cfg);
        assert_eq!(status, MitigationStatus::Applied { pixels: 24 * 24 });
        for y in 0..100 {
            for x in 0..100 {
                if x >= 24 || y >= 24 {
                    assert_eq!(out.pixel(x, y), [128; 3]);
                }
            }
        }
    }

    #[test]
    fn outside_region_is_noop() {
        let f = Frame::filled(0, 10, 10, [50; 3]);
        let (out, status) = apply_lbm(&f, &PersonRegion::new(20, 20, 5, 5), &NoiseConfig::default());
        assert_eq!(out, f);
        assert!(matches!(status, MitigationStatus::NoTarget(_)));
        let (out, status) = apply_kpm(&f, &[], &NoiseConfig::default());
        assert_eq!(out, f);
        assert!(matches!(status, MitigationStatus::NoTarget(_)));
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        let c = NoiseConfig {
            lambda: -1.0,
            ..NoiseConfig::default()
        };
        assert!(c.validate().is_err());
        assert!("lbm".parse::<Approach>().is_ok());
        assert!("box".parse::<Approach>().is_err());
    }
}

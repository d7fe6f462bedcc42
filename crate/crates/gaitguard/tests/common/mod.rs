//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gaitguard::core::derive_seed;
use gaitguard::core::keypoint::{Frame, Joint};
use gaitguard::core::mitigate::{
    hanning_window, lower_half, Approach, KeypointRecord, NoiseConfig, NoiseSampler, PersonRegion, RegionRecord,
};
use gaitguard::core::synth::WalkerSpec;

/// Small counter-based generator for test inputs.
pub struct Rng {
    seed: u64,
    n: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, n: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.n += 1;
        derive_seed(self.seed, self.n)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// A noise-free walker with random gait parameters.
pub fn random_walker(rng: &mut Rng, id: usize) -> WalkerSpec {
    let forward = rng.unit() < 0.5;
    let speed = rng.range(20.0, 60.0);
    let mut w = WalkerSpec::new(
        format!("w{id}"),
        if forward { speed } else { -speed },
        rng.range(0.6, 1.4),
        rng.range(40.0, 90.0),
    );
    w.stance_fraction = rng.range(0.5, 0.7);
    w.phase = rng.range(0.0, std::f64::consts::TAU);
    w.start_x_px = if forward { 80.0 } else { 560.0 };
    w
}

/// Random RGB frame with a share of saturated pixels.
pub fn random_frame(rng: &mut Rng, id: u32) -> Frame {
    let w = 48 + rng.below(112) as u32;
    let h = 40 + rng.below(90) as u32;
    let pixels = (0..w * h * 3)
        .map(|_| match rng.below(8) {
            0 => 0,
            1 => 255,
            _ => rng.below(256) as u8,
        })
        .collect();
    Frame::new(id, w, h, id as u64 * 33_333, pixels).unwrap()
}

/// One or two boxes, possibly past the frame edges, plus KPM keypoints.
pub fn random_record(rng: &mut Rng, frame: &Frame) -> RegionRecord {
    let (fw, fh) = (frame.width as f64, frame.height as f64);
    let n = 1 + rng.below(2) as usize;
    let boxes = (0..n)
        .map(|_| {
            let w = rng.range(4.0, fw * 0.8) as u32;
            let h = rng.range(4.0, fh * 1.2) as u32;
            let x = rng.range(-0.3 * fw, fw) as i32;
            let y = rng.range(-0.3 * fh, fh) as i32;
            PersonRegion::new(x, y, w, h)
        })
        .collect();
    let mut keypoints = BTreeMap::new();
    for j in [Joint::MidHip, Joint::LAnkle, Joint::RAnkle, Joint::Neck] {
        keypoints.insert(
            j,
            KeypointRecord {
                x: rng.range(-10.0, fw + 10.0),
                y: rng.range(-10.0, fh + 10.0),
                confidence: if rng.below(6) == 0 { 0.0 } else { 1.0 },
            },
        );
    }
    RegionRecord {
        frame_id: frame.frame_id,
        boxes,
        keypoints: Some(keypoints),
    }
}

/// Half-open target rectangles `(x0, y0, x1, y1)` of a record under `cfg`,
/// clipped to the frame.
pub fn target_rects(frame: &Frame, record: &RegionRecord, cfg: &NoiseConfig) -> Vec<(u32, u32, u32, u32)> {
    let clip = |x: i64, y: i64, w: i64, h: i64| {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w).min(frame.width as i64);
        let y1 = (y + h).min(frame.height as i64);
        (x1 > x0 && y1 > y0).then_some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    };
    match cfg.approach {
        Approach::Lbm => record
            .boxes
            .iter()
            .filter_map(|b| {
                let l = lower_half(b);
                clip(l.x as i64, l.y as i64, l.w as i64, l.h as i64)
            })
            .collect(),
        Approach::Kpm => {
            let side = cfg.kpm_patch_px as i64;
            record
                .kpm_targets()
                .iter()
                .filter_map(|&(x, y)| clip(x.round() as i64 - side / 2, y.round() as i64 - side / 2, side, side))
                .collect()
        }
    }
}

/// Reference mitigation written from the masking rule directly: every
/// covered pixel, row-major over the targets' bounding box, gets three
/// samples scaled by the Hann weight of the first rectangle covering it.
/// Returns the frame and each pixel's weight (`None` outside the targets).
pub fn reference_mitigation(frame: &Frame, record: &RegionRecord, cfg: &NoiseConfig) -> (Frame, Vec<Option<f64>>) {
    let mut out = frame.clone();
    let mut weights = vec![None; (frame.width * frame.height) as usize];
    if !cfg.enabled {
        return (out, weights);
    }
    let rects = target_rects(frame, record, cfg);
    if rects.is_empty() {
        return (out, weights);
    }
    let bx0 = rects.iter().map(|r| r.0).min().unwrap();
    let by0 = rects.iter().map(|r| r.1).min().unwrap();
    let bx1 = rects.iter().map(|r| r.2).max().unwrap();
    let by1 = rects.iter().map(|r| r.3).max().unwrap();
    let mut sampler = NoiseSampler::new(cfg.distribution, cfg.lambda, derive_seed(cfg.seed, frame.frame_id as u64));
    for y in by0..by1 {
        for x in bx0..bx1 {
            let Some(r) = rects.iter().find(|r| x >= r.0 && x < r.2 && y >= r.1 && y < r.3) else {
                continue;
            };
            let w = hanning_window((r.3 - r.1) as usize)[(y - r.1) as usize];
            weights[(y * frame.width + x) as usize] = Some(w);
            let i = frame.index(x, y);
            for c in 0..3 {
                let v = out.pixels[i + c] as f64 + w * sampler.sample();
                out.pixels[i + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    (out, weights)
}

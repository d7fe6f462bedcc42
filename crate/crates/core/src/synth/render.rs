use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::keypoint::{Frame, Joint, Keypoint, KeypointSequence, PersonPose};
use crate::math;
use crate::mitigate::{KeypointRecord, PersonRegion, RegionRecord};

/// Marker colors, geometry and extractor thresholds shared by the renderer
/// and [`MarkerExtractor`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    pub marker_radius_px: f64,
    /// Joints in drawing order; later markers paint over earlier ones.
    pub colors: Vec<(Joint, [u8; 3])>,
    /// Euclidean RGB distance under which a pixel counts for a marker.
    pub color_threshold: f64,
    /// Confidence under which a direct measurement is not trusted.
    pub reliability_floor: f64,
    /// Margin added on every side of the tight marker box, as a fraction of
    /// its height.
    pub region_margin: f64,
    /// Starting body offsets for the fallback predictor: Neck to MidHip,
    /// and MidHip to each knee and ankle.
    pub prior_offsets: Vec<(Joint, (f64, f64))>,
    /// Weight of a new measurement in the running offsets.
    pub offset_rate: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle::new(320, 240)
    }
}

impl RenderStyle {
    pub fn new(width: u32, height: u32) -> Self {
        RenderStyle {
            width,
            height,
            background: [128, 128, 128],
            marker_radius_px: 5.0,
            colors: alloc::vec![
                (Joint::Neck, [255, 0, 255]),
                (Joint::MidHip, [0, 255, 0]),
                (Joint::LKnee, [255, 255, 0]),
                (Joint::RKnee, [0, 255, 255]),
                (Joint::LAnkle, [255, 0, 0]),
                (Joint::RAnkle, [0, 0, 255]),
            ],
            color_threshold: 70.0,
            reliability_floor: 0.8,
            region_margin: 0.2,
            prior_offsets: alloc::vec![
                (Joint::MidHip, (0.0, 80.0)),
                (Joint::LKnee, (0.0, 40.0)),
                (Joint::RKnee, (0.0, 40.0)),
                (Joint::LAnkle, (0.0, 80.0)),
                (Joint::RAnkle, (0.0, 80.0)),
            ],
            offset_rate: 0.1,
        }
    }

    /// Marker color of `joint`, if it is drawn.
    pub fn marker_color(&self, joint: &Joint) -> Option<[u8; 3]> {
        self.colors.iter().find(|(j, _)| j == joint).map(|(_, c)| *c)
    }
}

/// Draws one pose as colored discs on the background. Returns the frame,
/// the region record (expanded marker box plus the true keypoints) and the
/// number of markers that were clipped by the canvas edge.
pub fn render_frame(pose: &PersonPose, frame_id: u32, timestamp_us: u64, style: &RenderStyle) -> (Frame, RegionRecord, usize) {
    let mut frame = Frame::filled(frame_id, style.width, style.height, style.background);
    frame.timestamp_us = timestamp_us;
    let r = style.marker_radius_px;
    let r2 = r * r;
    let (w, h) = (style.width as i64, style.height as i64);
    let mut bounds: Option<(i64, i64, i64, i64)> = None;
    let mut clipped = 0;
    let mut keypoints = BTreeMap::new();
    for (joint, color) in &style.colors {
        let Some(kp) = pose.present(joint) else { continue };
        keypoints.insert(
            joint.clone(),
            KeypointRecord {
                x: kp.x,
                y: kp.y,
                confidence: kp.confidence,
            },
        );
        let x0 = math::floor(kp.x - r) as i64;
        let x1 = math::ceil(kp.x + r) as i64;
        let y0 = math::floor(kp.y - r) as i64;
        let y1 = math::ceil(kp.y + r) as i64;
        if x0 < 0 || y0 < 0 || x1 >= w || y1 >= h {
            clipped += 1;
        }
        for py in y0.max(0)..=y1.min(h - 1) {
            for px in x0.max(0)..=x1.min(w - 1) {
                let dx = px as f64 - kp.x;
                let dy = py as f64 - kp.y;
                if dx * dx + dy * dy <= r2 {
                    frame.set_pixel(px as u32, py as u32, *color);
                    bounds = Some(match bounds {
                        None => (px, py, px, py),
                        Some((a, b, c, d)) => (a.min(px), b.min(py), c.max(px), d.max(py)),
                    });
                }
            }
        }
    }
    let boxes = match bounds {
        Some((bx0, by0, bx1, by1)) => {
            let bw = bx1 - bx0 + 1;
            let bh = by1 - by0 + 1;
            let m = math::round(style.region_margin * bh as f64) as i64;
            alloc::vec![PersonRegion::new(
                (bx0 - m) as i32,
                (by0 - m) as i32,
                (bw + 2 * m) as u32,
                (bh + 2 * m) as u32,
            )]
        }
        None => Vec::new(),
    };
    let record = RegionRecord {
        frame_id,
        boxes,
        keypoints: Some(keypoints),
    };
    (frame, record, clipped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedClip {
    pub frames: Vec<Frame>,
    pub regions: Vec<RegionRecord>,
    /// Markers that did not fit the canvas, summed over frames.
    pub clipped_markers: usize,
}

/// Renders every frame of `seq` (the subject pose of each frame).
pub fn render_frames(seq: &KeypointSequence, style: &RenderStyle) -> RenderedClip {
    let mut out = RenderedClip {
        frames: Vec::with_capacity(seq.frames.len()),
        regions: Vec::with_capacity(seq.frames.len()),
        clipped_markers: 0,
    };
    let empty = PersonPose {
        person_index: 0,
        keypoints: Vec::new(),
    };
    for f in &seq.frames {
        let pose = f.subject().unwrap_or(&empty);
        let ts = math::round(f.timestamp_s * 1e6).max(0.0) as u64;
        let (frame, record, clipped) = render_frame(pose, f.frame_index as u32, ts, style);
        out.frames.push(frame);
        out.regions.push(record);
        out.clipped_markers += clipped;
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Measurement {
    x: f64,
    y: f64,
    confidence: f64,
}

/// Marker-centroid keypoint extractor with a body-relative fallback.
///
/// Each joint is measured as the centroid of the largest connected blob of
/// pixels near its marker color. Measurements below the reliability floor are replaced, in order:
/// MidHip from Neck plus the running Neck-to-MidHip offset; knees from
/// MidHip plus their running offsets; ankles by extending a reliable knee
/// away from the MidHip, else from MidHip plus their running offsets.
/// Fallback keypoints carry confidence 0.3. Running offsets only learn from
/// reliable measurements, so a stateful extractor run over a clip keeps the
/// last trustworthy body shape.
#[derive(Debug, Clone)]
pub struct MarkerExtractor {
    style: RenderStyle,
    offsets: BTreeMap<Joint, (f64, f64)>,
}

pub const FALLBACK_CONFIDENCE: f64 = 0.3;

impl MarkerExtractor {
    pub fn new(style: &RenderStyle) -> Self {
        MarkerExtractor {
            offsets: style.prior_offsets.iter().cloned().collect(),
            style: style.clone(),
        }
    }

    fn measure(&self, frame: &Frame) -> Vec<Option<Measurement>> {
        let colors: Vec<[i32; 3]> = self
            .style
            .colors
            .iter()
            .map(|(_, c)| [c[0] as i32, c[1] as i32, c[2] as i32])
            .collect();
        let t2 = (self.style.color_threshold * self.style.color_threshold) as i32;
        let (w, h) = (frame.width as usize, frame.height as usize);
        let mut label = alloc::vec![u8::MAX; w * h];
        for y in 0..h {
            for x in 0..w {
                let p = frame.pixel(x as u32, y as u32);
                let mut best_d = t2;
                for (k, c) in colors.iter().enumerate() {
                    let d0 = p[0] as i32 - c[0];
                    let d1 = p[1] as i32 - c[1];
                    let d2 = p[2] as i32 - c[2];
                    let d = d0 * d0 + d1 * d1 + d2 * d2;
                    if d < best_d {
                        best_d = d;
                        label[y * w + x] = k as u8;
                    }
                }
            }
        }
        // Largest 8-connected blob per color: (size, sum x, sum y).
        let mut best: Vec<(usize, f64, f64)> = alloc::vec![(0, 0.0, 0.0); colors.len()];
        let mut seen = alloc::vec![false; w * h];
        let mut stack = Vec::new();
        for start in 0..w * h {
            let k = label[start];
            if k == u8::MAX || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                n += 1;
                sx += x as f64;
                sy += y as f64;
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let j = ny * w + nx;
                        if !seen[j] && label[j] == k {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            if n > best[k as usize].0 {
                best[k as usize] = (n, sx, sy);
            }
        }
        let r = self.style.marker_radius_px;
        let area = core::f64::consts::PI * r * r;
        best.into_iter()
            .map(|(n, sx, sy)| {
                (n > 0).then(|| Measurement {
                    x: sx / n as f64,
                    y: sy / n as f64,
                    confidence: (n as f64 / area).min(1.0),
                })
            })
            .collect()
    }

    fn offset(&self, joint: &Joint) -> (f64, f64) {
        self.offsets.get(joint).copied().unwrap_or((0.0, 0.0))
    }

    fn learn(&mut self, joint: &Joint, from: (f64, f64), to: (f64, f64)) {
        let a = self.style.offset_rate;
        let (ox, oy) = self.offset(joint);
        let next = (
            (1.0 - a) * ox + a * (to.0 - from.0),
            (1.0 - a) * oy + a * (to.1 - from.1),
        );
        self.offsets.insert(joint.clone(), next);
    }

    /// Extracts one pose and updates the running offsets.
    pub fn extract(&mut self, frame: &Frame) -> PersonPose {
        let measured = self.measure(frame);
        let floor = self.style.reliability_floor;
        let joints: Vec<Joint> = self.style.colors.iter().map(|(j, _)| j.clone()).collect();
        let raw = |j: &Joint| -> Option<Measurement> {
            joints.iter().position(|x| x == j).and_then(|k| measured[k])
        };
        let reliable = |j: &Joint| raw(j).filter(|m| m.confidence >= floor);
        let as_point = |m: Measurement| (m.x, m.y);
        let fallback = |base: (f64, f64), off: (f64, f64)| Measurement {
            x: base.0 + off.0,
            y: base.1 + off.1,
            confidence: FALLBACK_CONFIDENCE,
        };

        let neck = raw(&Joint::Neck);
        let hip = match reliable(&Joint::MidHip) {
            Some(m) => {
                if let Some(n) = reliable(&Joint::Neck) {
                    self.learn(&Joint::MidHip, as_point(n), as_point(m));
                }
                Some(m)
            }
            None => match neck {
                Some(n) => Some(fallback(as_point(n), self.offset(&Joint::MidHip))),
                None => raw(&Joint::MidHip),
            },
        };
        let hip_direct = reliable(&Joint::MidHip).is_some();

        let mut knees: [Option<Measurement>; 2] = [None, None];
        for (slot, knee) in [Joint::LKnee, Joint::RKnee].iter().enumerate() {
            knees[slot] = match (reliable(knee), hip) {
                (Some(m), Some(h)) => {
                    if hip_direct {
                        self.learn(knee, as_point(h), as_point(m));
                    }
                    Some(m)
                }
                (Some(m), None) => Some(m),
                (None, Some(h)) => Some(fallback(as_point(h), self.offset(knee))),
                (None, None) => raw(knee),
            };
        }

        let mut ankles: [Option<Measurement>; 2] = [None, None];
        for (slot, (ankle, knee)) in [(Joint::LAnkle, Joint::LKnee), (Joint::RAnkle, Joint::RKnee)]
            .iter()
            .enumerate()
        {
            ankles[slot] = match (reliable(ankle), hip) {
                (Some(m), Some(h)) => {
                    if hip_direct {
                        self.learn(ankle, as_point(h), as_point(m));
                    }
                    Some(m)
                }
                (Some(m), None) => Some(m),
                (None, Some(h)) => match reliable(knee) {
                    Some(k) => Some(Measurement {
                        x: 2.0 * k.x - h.x,
                        y: 2.0 * k.y - h.y,
                        confidence: FALLBACK_CONFIDENCE,
                    }),
                    None => Some(fallback(as_point(h), self.offset(ankle))),
                },
                (None, None) => raw(ankle),
            };
        }

        let to_kp = |j: Joint, m: Option<Measurement>| match m {
            Some(m) => Keypoint::new(j, m.x, m.y, m.confidence.clamp(0.0, 1.0)),
            None => Keypoint::missing(j),
        };
        PersonPose {
            person_index: 0,
            keypoints: alloc::vec![
                to_kp(Joint::Neck, neck),
                to_kp(Joint::MidHip, hip),
                to_kp(Joint::LKnee, knees[0]),
                to_kp(Joint::RKnee, knees[1]),
                to_kp(Joint::LAnkle, ankles[0]),
                to_kp(Joint::RAnkle, ankles[1]),
            ],
        }
    }
}

/// Stateless extraction using the style's prior body offsets.
pub fn extract_markers(frame: &Frame, style: &RenderStyle) -> PersonPose {
    MarkerExtractor::new(style).extract(frame)
}

/// Runs a fresh extractor over a clip and assembles a keypoint sequence.
pub fn extract_sequence(
    frames: &[Frame],
    style: &RenderStyle,
    subject_id: &str,
    sequence_id: &str,
    fps: f64,
) -> KeypointSequence {
    let mut ex = MarkerExtractor::new(style);
    let frames = frames
        .iter()
        .map(|f| crate::keypoint::KeypointFrame {
            frame_index: f.frame_id as u64,
            timestamp_s: f.timestamp_us as f64 / 1e6,
            poses: alloc::vec![ex.extract(f)],
        })
        .collect();
    KeypointSequence {
        subject_id: subject_id.into(),
        sequence_id: sequence_id.into(),
        fps,
        frames,
    }
}

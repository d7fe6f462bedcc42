use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::signal::{interpolated, joint_x, Grid};
use super::{correct_leg_labels, detect_direction, detect_events, validate_full_cycle};
use super::{no_cycle_reason, EventKind, EventParams, GaitEvent, Leg};
use crate::keypoint::{meters_per_pixel, Joint, KeypointSequence, MarkerCalibration};
use crate::Result;

/// Column names of the ten per-cycle features, in row order.
pub const FEATURE_NAMES: [&str; 10] = [
    "left_step_time_s",
    "right_step_time_s",
    "left_stance_time_s",
    "right_stance_time_s",
    "left_swing_time_s",
    "right_swing_time_s",
    "rl_double_support_s",
    "lr_double_support_s",
    "left_step_length_m",
    "right_step_length_m",
];

/// Indices into [`FEATURE_NAMES`] of the step-length columns.
pub const STEP_LENGTH_FEATURES: [usize; 2] = [8, 9];

/// Upper sanity bound for any gait duration, seconds.
const MAX_DURATION_S: f64 = 5.0;
/// Rows with fewer present features are dropped.
const MIN_PRESENT_FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitFeatureRow {
    pub subject_id: String,
    pub sequence_id: String,
    pub cycle_index: u32,
    pub left_step_time_s: Option<f64>,
    pub right_step_time_s: Option<f64>,
    pub left_stance_time_s: Option<f64>,
    pub right_stance_time_s: Option<f64>,
    pub left_swing_time_s: Option<f64>,
    pub right_swing_time_s: Option<f64>,
    pub rl_double_support_s: Option<f64>,
    pub lr_double_support_s: Option<f64>,
    pub left_step_length_m: Option<f64>,
    pub right_step_length_m: Option<f64>,
}

impl GaitFeatureRow {
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.left_step_time_s,
            self.right_step_time_s,
            self.left_stance_time_s,
            self.right_stance_time_s,
            self.left_swing_time_s,
            self.right_swing_time_s,
            self.rl_double_support_s,
            self.lr_double_support_s,
            self.left_step_length_m,
            self.right_step_length_m,
        ]
    }

    pub fn from_values(subject_id: String, sequence_id: String, cycle_index: u32, v: [Option<f64>; 10]) -> Self {
        GaitFeatureRow {
            subject_id,
            sequence_id,
            cycle_index,
            left_step_time_s: v[0],
            right_step_time_s: v[1],
            left_stance_time_s: v[2],
            right_stance_time_s: v[3],
            left_swing_time_s: v[4],
            right_swing_time_s: v[5],
            rl_double_support_s: v[6],
            lr_double_support_s: v[7],
            left_step_length_m: v[8],
            right_step_length_m: v[9],
        }
    }

    pub fn present_count(&self) -> usize {
        self.values().iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub rows: Vec<GaitFeatureRow>,
    pub rejected: bool,
    pub rejection_reason: Option<String>,
}

impl ExtractionReport {
    fn rejected(reason: String) -> Self {
        ExtractionReport {
            rows: Vec::new(),
            rejected: true,
            rejection_reason: Some(reason),
        }
    }
}

type Ev = (Leg, EventKind);
const L_HS: Ev = (Leg::Left, EventKind::HeelStrike);
const R_HS: Ev = (Leg::Right, EventKind::HeelStrike);
const L_TO: Ev = (Leg::Left, EventKind::ToeOff);
const R_TO: Ev = (Leg::Right, EventKind::ToeOff);

/// (start, end, guard) for the eight duration features in column order.
/// A duration runs from a start event inside the cycle to the first end
/// event at or after it, provided no guard event falls strictly between.
const DURATIONS: [(Ev, Ev, Ev); 8] = [
    (R_HS, L_HS, R_HS), // left step
    (L_HS, R_HS, L_HS), // right step
    (L_HS, L_TO, L_HS), // left stance
    (R_HS, R_TO, R_HS), // right stance
    (L_TO, L_HS, L_TO), // left swing
    (R_TO, R_HS, R_TO), // right swing
    (R_HS, L_TO, L_HS), // right-to-left double support
    (L_HS, R_TO, R_HS), // left-to-right double support
];

struct EventTable {
    frames: [Vec<u64>; 4],
    /// Refined event time by frame, per slot.
    times: [BTreeMap<u64, f64>; 4],
}

impl EventTable {
    fn new(events: &[GaitEvent]) -> Self {
        let mut frames: [Vec<u64>; 4] = Default::default();
        let mut times: [BTreeMap<u64, f64>; 4] = Default::default();
        for e in events {
            let k = Self::slot((e.leg, e.kind));
            frames[k].push(e.frame_index);
            times[k].insert(e.frame_index, e.time_s);
        }
        for f in &mut frames {
            f.sort_unstable();
        }
        EventTable { frames, times }
    }

    fn time(&self, ev: Ev, frame: u64, fps: f64) -> f64 {
        self.times[Self::slot(ev)]
            .get(&frame)
            .copied()
            .unwrap_or(frame as f64 / fps)
    }

    fn slot(ev: Ev) -> usize {
        match ev {
            L_HS => 0,
            R_HS => 1,
            L_TO => 2,
            R_TO => 3,
        }
    }

    fn of(&self, ev: Ev) -> &[u64] {
        &self.frames[Self::slot(ev)]
    }
}

/// `x[i + offset]` by linear interpolation toward the neighbour on the
/// offset's side; `x[i]` when that neighbour is missing.
fn sample_at(x: &[Option<f64>], i: usize, offset: f64) -> Option<f64> {
    let here = x.get(i).copied().flatten()?;
    let j = if offset < 0.0 { i.checked_sub(1) } else { Some(i + 1) };
    match j.and_then(|j| x.get(j).copied().flatten()) {
        Some(there) => Some(here + (there - here) * offset.abs()),
        None => Some(here),
    }
}

/// Runs the whole extraction: leg correction, direction, events, full-cycle
/// validation and one feature row per completed cycle.
pub fn extract_features(
    seq: &KeypointSequence,
    cal: Option<&MarkerCalibration>,
    params: &EventParams,
) -> Result<ExtractionReport> {
    let mpp = cal.map(meters_per_pixel).transpose()?;
    let seq = correct_leg_labels(seq);
    let dir = detect_direction(&seq)?;
    let events = detect_events(&seq, dir, params)?;
    if !validate_full_cycle(&events) {
        return Ok(ExtractionReport::rejected(no_cycle_reason()));
    }
    let table = EventTable::new(&events);

    // Cycles are delimited by consecutive heel-strikes of the leg striking
    // first among legs with two of them, or by toe-offs when no leg has two
    // heel-strikes.
    let anchors = [L_HS, R_HS]
        .into_iter()
        .filter(|&e| table.of(e).len() >= 2)
        .min_by_key(|&e| table.of(e)[0])
        .or_else(|| {
            [L_TO, R_TO]
                .into_iter()
                .filter(|&e| table.of(e).len() >= 2)
                .min_by_key(|&e| table.of(e)[0])
        })
        .map(|e| table.of(e).to_vec())
        .unwrap_or_default();

    let grid = Grid::of(&seq);
    let lx = interpolated(&joint_x(&seq, &grid, &Joint::LAnkle), params.max_gap_frames);
    let rx = interpolated(&joint_x(&seq, &grid, &Joint::RAnkle), params.max_gap_frames);

    let mut rows = Vec::new();
    for (k, w) in anchors.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        let in_cycle = |f: &u64| *f >= start && *f < end;
        let mut values = [None; 10];
        for (slot, &(from, to, guard)) in DURATIONS.iter().enumerate() {
            let Some(&t0) = table.of(from).iter().find(|f| in_cycle(f)) else { continue };
            let Some(&t1) = table.of(to).iter().find(|&&f| f >= t0) else { continue };
            if table.of(guard).iter().any(|&g| g > t0 && g < t1) {
                continue;
            }
            if t1 == t0 {
                continue;
            }
            let d = table.time(to, t1, seq.fps) - table.time(from, t0, seq.fps);
            if d > 0.0 && d < MAX_DURATION_S {
                values[slot] = Some(d);
            }
        }
        if let Some(mpp) = mpp {
            for (slot, strike) in [(8, L_HS), (9, R_HS)] {
                let Some(&f) = table.of(strike).iter().find(|f| in_cycle(f)) else { continue };
                let offset = table.time(strike, f, seq.fps) * seq.fps - f as f64;
                let i = grid.slot(f);
                if let (Some(l), Some(r)) = (sample_at(&lx, i, offset), sample_at(&rx, i, offset)) {
                    values[slot] = Some((l - r).abs() * mpp);
                }
            }
        }
        let row = GaitFeatureRow::from_values(seq.subject_id.clone(), seq.sequence_id.clone(), k as u32, values);
        if row.present_count() >= MIN_PRESENT_FEATURES {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Ok(ExtractionReport::rejected(String::from(
            "no gait cycle yielded enough features",
        )));
    }
    Ok(ExtractionReport {
        rows,
        rejected: false,
        rejection_reason: None,
    })
}

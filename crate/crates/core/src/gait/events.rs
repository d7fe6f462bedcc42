use alloc::format;
use alloc::vec::Vec;

use super::signal::{interpolate_segments, joint_x, Grid};
use super::{EventKind, EventParams, GaitEvent, Leg, WalkDirection};
use crate::keypoint::{Joint, KeypointSequence};
use crate::{Error, Result};

/// Indices of local maxima (plateaus resolve to their middle sample).
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Peak prominence. Each side is scanned until a strictly higher sample;
/// a side that runs into the signal edge first is unbounded and only
/// contributes when both sides are unbounded.
fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let scan = |iter: &mut dyn Iterator<Item = usize>| -> (f64, bool) {
        let mut lowest = h;
        for i in iter {
            if x[i] > h {
                return (lowest, true);
            }
            lowest = lowest.min(x[i]);
        }
        (lowest, false)
    };
    let (left, left_bounded) = scan(&mut (0..peak).rev());
    let (right, right_bounded) = scan(&mut (peak + 1..x.len()));
    let base = match (left_bounded, right_bounded) {
        (true, true) => left.max(right),
        (true, false) => left,
        (false, true) => right,
        (false, false) => left.min(right),
    };
    h - base
}

/// Local maxima of `x` with prominence at least `min_prominence`, thinned so
/// that no two kept peaks are closer than `min_distance` samples (higher
/// peaks win, earlier index breaks ties). Returned in ascending order.
pub fn find_peaks(x: &[f64], min_prominence: f64, min_distance: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .collect();
    if min_distance > 1 && peaks.len() > 1 {
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
        let mut keep = alloc::vec![true; peaks.len()];
        for &i in &order {
            if !keep[i] {
                continue;
            }
            for j in 0..peaks.len() {
                if j != i && keep[j] && peaks[i].abs_diff(peaks[j]) < min_distance {
                    keep[j] = false;
                }
            }
        }
        peaks = peaks
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
    }
    peaks
}

/// Sub-sample offset of a peak in `[-0.5, 0.5]`: the maximum of the cubic
/// through the peak, both neighbours and the next sample beyond the higher
/// neighbour (a parabola when that sample is missing). Zero at a segment
/// edge.
fn vertex_offset(y: &[f64], p: usize) -> f64 {
    if p == 0 || p + 1 >= y.len() {
        return 0.0;
    }
    let Some((base, pts)) = stencil(y, p) else {
        let (a, b, c) = (y[p - 1], y[p], y[p + 1]);
        let curvature = a - 2.0 * b + c;
        return if curvature < 0.0 { (0.5 * (a - c) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    };
    // Maximise on a fine grid; the cubic is smooth over one sample.
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=200 {
        let off = -0.5 + k as f64 / 200.0;
        let v = lagrange4(&pts, p as f64 + off - base as f64);
        if v > best.0 {
            best = (v, off);
        }
    }
    best.1
}

/// Four samples around `p`, extended toward the higher neighbour, with the
/// index of the first one.
fn stencil(y: &[f64], p: usize) -> Option<(usize, [f64; 4])> {
    let base = if y[p - 1] >= y[p + 1] { p.checked_sub(2)? } else { p - 1 };
    let pts = y.get(base..base + 4)?;
    Some((base, [pts[0], pts[1], pts[2], pts[3]]))
}

/// Lagrange cubic through `(0, v0) .. (3, v3)` evaluated at `t`.
fn lagrange4(v: &[f64; 4], t: f64) -> f64 {
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
}

/// Heel-strikes (maxima) and toe-offs (minima) of the forward ankle
/// excursion `s * (x_ankle - x_midhip)` for each leg, sorted by time.
/// `frame_index` is the extremal sample; `time_s` refines it with a local
/// cubic fit and stays within half a frame of it.
pub fn detect_events(seq: &KeypointSequence, dir: WalkDirection, params: &EventParams) -> Result<Vec<GaitEvent>> {
    let grid = Grid::of(seq);
    let hip = joint_x(seq, &grid, &Joint::MidHip);
    let n_frames = seq.frames.len();
    let hip_frames = hip.iter().filter(|v| v.is_some()).count();
    if n_frames == 0 || 2 * hip_frames < n_frames {
        return Err(Error::InsufficientData(format!(
            "MidHip observed in {hip_frames} of {n_frames} frames"
        )));
    }
    let s = dir.sign();
    let min_distance = (crate::math::round(params.min_separation_s * seq.fps) as usize).max(1);
    let mut events = Vec::new();
    let mut usable = false;
    for (leg, joint) in [(Leg::Left, Joint::LAnkle), (Leg::Right, Joint::RAnkle)] {
        let ankle = joint_x(seq, &grid, &joint);
        let excursion: Vec<Option<f64>> = hip
            .iter()
            .zip(&ankle)
            .map(|(h, a)| match (h, a) {
                (Some(h), Some(a)) => Some(s * (a - h)),
                _ => None,
            })
            .collect();
        for seg in interpolate_segments(&excursion, params.max_gap_frames) {
            if seg.values.len() < 3 {
                continue;
            }
            usable = true;
            let (lo, hi) = seg
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let min_prom = params.min_prominence_frac * (hi - lo);
            if hi - lo <= 0.0 {
                continue;
            }
            let negated: Vec<f64> = seg.values.iter().map(|v| -v).collect();
            for (kind, peaks) in [
                (EventKind::HeelStrike, find_peaks(&seg.values, min_prom, min_distance)),
                (EventKind::ToeOff, find_peaks(&negated, min_prom, min_distance)),
            ] {
                let y = if kind == EventKind::HeelStrike { &seg.values } else { &negated };
                for p in peaks {
                    let frame_index = grid.frame_index(seg.start + p);
                    events.push(GaitEvent {
                        leg,
                        kind,
                        time_s: (frame_index as f64 + vertex_offset(y, p)) / seq.fps,
                        frame_index,
                    });
                }
            }
        }
    }
    if !usable {
        return Err(Error::InsufficientData(
            "no ankle excursion signal with at least 3 samples".into(),
        ));
    }
    events.sort_by(|a, b| {
        a.frame_index
            .cmp(&b.frame_index)
            .then(a.leg.cmp(&b.leg))
            .then(a.kind.cmp(&b.kind))
    });
    Ok(events)
}

/// A sequence covers a full gait cycle when some leg shows two heel-strikes
/// or two toe-offs.
pub fn validate_full_cycle(events: &[GaitEvent]) -> bool {
    [Leg::Left, Leg::Right].iter().any(|&leg| {
        [EventKind::HeelStrike, EventKind::ToeOff]
            .iter()
            .any(|&kind| events.iter().filter(|e| e.leg == leg && e.kind == kind).count() >= 2)
    })
}

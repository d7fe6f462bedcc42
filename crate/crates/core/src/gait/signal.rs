use alloc::vec;
use alloc::vec::Vec;

use crate::keypoint::{Joint, KeypointSequence};

/// A per-frame series on the dense frame-index grid of a sequence.
pub(crate) struct Grid {
    pub first_index: u64,
    pub len: usize,
}

impl Grid {
    pub fn of(seq: &KeypointSequence) -> Grid {
        match (seq.frames.first(), seq.frames.last()) {
            (Some(a), Some(b)) => Grid {
                first_index: a.frame_index,
                len: (b.frame_index - a.frame_index) as usize + 1,
            },
            _ => Grid {
                first_index: 0,
                len: 0,
            },
        }
    }

    #[inline]
    pub fn slot(&self, frame_index: u64) -> usize {
        (frame_index - self.first_index) as usize
    }

    #[inline]
    pub fn frame_index(&self, slot: usize) -> u64 {
        self.first_index + slot as u64
    }
}

/// Observed x of `joint` on the grid (None where missing).
pub(crate) fn joint_x(seq: &KeypointSequence, grid: &Grid, joint: &Joint) -> Vec<Option<f64>> {
    let mut out = vec![None; grid.len];
    for frame in &seq.frames {
        if let Some(kp) = frame.subject().and_then(|p| p.present(joint)) {
            out[grid.slot(frame.frame_index)] = Some(kp.x);
        }
    }
    out
}

/// Contiguous run of samples starting at grid slot `start`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Segment {
    pub start: usize,
    pub values: Vec<f64>,
}

/// Linearly bridges gaps of at most `max_gap` missing samples; longer gaps
/// split the series into separate segments. Leading and trailing missing
/// samples are dropped.
pub(crate) fn interpolate_segments(series: &[Option<f64>], max_gap: usize) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut current: Option<Segment> = None;
    let mut last: Option<(usize, f64)> = None;
    for (i, v) in series.iter().enumerate() {
        let Some(v) = *v else { continue };
        match (last, current.as_mut()) {
            (Some((j, prev)), Some(seg)) if i - j - 1 <= max_gap => {
                let span = (i - j) as f64;
                for k in 1..(i - j) {
                    let t = k as f64 / span;
                    seg.values.push(prev + (v - prev) * t);
                }
                seg.values.push(v);
            }
            _ => {
                if let Some(seg) = current.take() {
                    segments.push(seg);
                }
                current = Some(Segment {
                    start: i,
                    values: vec![v],
                });
            }
        }
        last = Some((i, v));
    }
    if let Some(seg) = current {
        segments.push(seg);
    }
    segments
}

/// Dense series with gaps bridged, `None` where no segment covers a slot.
pub(crate) fn interpolated(series: &[Option<f64>], max_gap: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; series.len()];
    for seg in interpolate_segments(series, max_gap) {
        for (k, v) in seg.values.into_iter().enumerate() {
            out[seg.start + k] = Some(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_gaps_are_bridged() {
        let s = [Some(0.0), None, None, Some(3.0), Some(4.0)];
        let segs = interpolate_segments(&s, 5);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].values, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn long_gaps_split() {
        let mut s = vec![Some(1.0), Some(2.0)];
        s.extend(core::iter::repeat_n(None, 6));
        s.extend([Some(5.0), Some(6.0)]);
        let segs = interpolate_segments(&s, 5);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].start, 8);
        let dense = interpolated(&s, 5);
        assert_eq!(dense[3], None);
        assert_eq!(dense[9], Some(6.0));
    }
}

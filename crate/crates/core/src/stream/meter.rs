use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeterEvent {
    Received,
    Processed,
    Sent,
}

#[derive(Debug, Clone, Copy)]
struct Record {
    frame_id: u32,
    received: f64,
    processed: bool,
    sent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeterSnapshot {
    pub in_fps: f64,
    pub processed_fps: f64,
    pub out_fps: f64,
    /// Receive-to-send latency in milliseconds.
    pub latency_ms: LatencyStats,
    pub frames_total: u64,
}

/// Sliding-window frame rates for one connection.
///
/// Every stage is counted over the frames *received* inside the window, so
/// `out_fps <= processed_fps <= in_fps` holds for every window. Until one
/// full window has passed since the first frame, rates are taken over the
/// elapsed time instead.
#[derive(Debug, Clone)]
pub struct ThroughputMeter {
    window_s: f64,
    records: VecDeque<Record>,
    frames_total: u64,
    first: Option<f64>,
}

impl Default for ThroughputMeter {
    fn default() -> Self {
        ThroughputMeter::new(2.0)
    }
}

impl ThroughputMeter {
    pub fn new(window_s: f64) -> Self {
        ThroughputMeter {
            window_s: if window_s > 0.0 { window_s } else { 2.0 },
            records: VecDeque::new(),
            frames_total: 0,
            first: None,
        }
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    fn prune(&mut self, now: f64) {
        while let Some(r) = self.records.front() {
            if r.received < now - self.window_s {
                self.records.pop_front();
            } else {
                break;
            }
        }
    }

    /// Records a stage event for `frame_id` at time `t` (seconds, monotone).
    /// Processed and sent events for frames that already left the window
    /// are ignored.
    pub fn record(&mut self, event: MeterEvent, frame_id: u32, t: f64) {
        match event {
            MeterEvent::Received => {
                self.frames_total += 1;
                self.first.get_or_insert(t);
                self.records.push_back(Record {
                    frame_id,
                    received: t,
                    processed: false,
                    sent: None,
                });
            }
            MeterEvent::Processed | MeterEvent::Sent => {
                let rec = self
                    .records
                    .iter_mut()
                    .rev()
                    .find(|r| r.frame_id == frame_id && r.sent.is_none());
                if let Some(r) = rec {
                    if event == MeterEvent::Processed {
                        r.processed = true;
                    } else {
                        r.processed = true;
                        r.sent = Some(t);
                    }
                }
            }
        }
        self.prune(t);
    }

    /// Rates over the window ending at `now`.
    pub fn snapshot(&mut self, now: f64) -> MeterSnapshot {
        self.prune(now);
        let in_window = self.records.iter().filter(|r| r.received <= now);
        let (mut n_in, mut n_proc) = (0usize, 0usize);
        let mut lat: Vec<f64> = Vec::new();
        for r in in_window {
            n_in += 1;
            if r.processed {
                n_proc += 1;
            }
            if let Some(s) = r.sent.filter(|s| *s <= now) {
                lat.push((s - r.received) * 1000.0);
            }
        }
        let w = match self.first {
            Some(t0) if now - t0 > 0.0 => (now - t0).min(self.window_s),
            _ => self.window_s,
        };
        MeterSnapshot {
            in_fps: n_in as f64 / w,
            processed_fps: n_proc as f64 / w,
            out_fps: lat.len() as f64 / w,
            latency_ms: latency_stats(&mut lat),
            frames_total: self.frames_total,
        }
    }
}

fn latency_stats(v: &mut [f64]) -> LatencyStats {
    if v.is_empty() {
        return LatencyStats::default();
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = |q: f64| {
        let k = crate::math::ceil(q * v.len() as f64) as usize;
        v[k.clamp(1, v.len()) - 1]
    };
    LatencyStats {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        p50: rank(0.5),
        p95: rank(0.95),
    }
}

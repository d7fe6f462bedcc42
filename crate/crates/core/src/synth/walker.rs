use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::gait::{EventKind, GaitEvent, Leg, WalkDirection};
use crate::keypoint::{Joint, Keypoint, KeypointFrame, KeypointSequence, PersonPose};
use crate::math;
use crate::mitigate::{Distribution, NoiseSampler};
use crate::{Error, Result};

fn default_hip() -> f64 {
    100.0
}
fn default_ankle() -> f64 {
    180.0
}
fn default_start() -> f64 {
    40.0
}
fn default_stance() -> f64 {
    0.5
}
fn default_lift() -> f64 {
    25.0
}

/// Parametric walker. Each ankle oscillates about the MidHip with the
/// per-leg phase `u = frac(cadence * t + (phase_leg - pi/2) / 2pi)`:
/// heel-strike at `u = 0`, toe-off at `u = stance_fraction`. With the
/// default stance fraction of one half the excursion is the pure sine
/// `A sin(2 pi cadence t + phase_leg)`. The right leg runs half a cycle
/// behind the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerSpec {
    pub subject_id: String,
    pub velocity_px_s: f64,
    /// Strides per second of each leg.
    pub cadence_hz: f64,
    /// Fore-aft ankle excursion. Derived from `step_length_px` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_px: Option<f64>,
    /// Ankle separation at heel-strike.
    pub step_length_px: f64,
    #[serde(default = "default_hip")]
    pub hip_height_px: f64,
    #[serde(default = "default_ankle")]
    pub ankle_height_px: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub noise_px: f64,
    #[serde(default = "default_start")]
    pub start_x_px: f64,
    /// Share of the cycle spent in stance, in `[0.5, 0.8]`.
    #[serde(default = "default_stance")]
    pub stance_fraction: f64,
    /// Peak ankle lift during swing, pixels.
    #[serde(default = "default_lift")]
    pub swing_lift_px: f64,
}

impl WalkerSpec {
    pub fn new(subject_id: impl Into<String>, velocity_px_s: f64, cadence_hz: f64, step_length_px: f64) -> Self {
        WalkerSpec {
            subject_id: subject_id.into(),
            velocity_px_s,
            cadence_hz,
            amplitude_px: None,
            step_length_px,
            hip_height_px: default_hip(),
            ankle_height_px: default_ankle(),
            phase: 0.0,
            noise_px: 0.0,
            start_x_px: default_start(),
            stance_fraction: default_stance(),
            swing_lift_px: default_lift(),
        }
    }

    /// Normalized excursion profile, 1 at heel-strike and -1 at toe-off.
    fn profile(&self, u: f64) -> f64 {
        let b = self.stance_fraction;
        if u < b {
            math::cos(PI * u / b)
        } else {
            -math::cos(PI * (u - b) / (1.0 - b))
        }
    }

    /// Ankle separation at heel-strike per unit amplitude.
    fn separation_ratio(&self) -> f64 {
        1.0 - self.profile(0.5)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude_px
            .unwrap_or(self.step_length_px / self.separation_ratio())
    }

    pub fn direction(&self) -> WalkDirection {
        if self.velocity_px_s < 0.0 {
            WalkDirection::RightToLeft
        } else {
            WalkDirection::LeftToRight
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be > 0, got {v}")))
            }
        };
        positive(self.cadence_hz, "cadence_hz")?;
        positive(self.step_length_px, "step_length_px")?;
        if !(0.5..=0.8).contains(&self.stance_fraction) {
            return Err(Error::Validation(format!(
                "stance_fraction must be in [0.5, 0.8], got {}",
                self.stance_fraction
            )));
        }
        if let Some(a) = self.amplitude_px {
            positive(a, "amplitude_px")?;
            let implied = a * self.separation_ratio();
            if (implied - self.step_length_px).abs() > 1e-6 * self.step_length_px.max(1.0) {
                return Err(Error::Validation(format!(
                    "amplitude_px {a} implies step length {implied}, not {}",
                    self.step_length_px
                )));
            }
        }
        for (v, name) in [
            (self.velocity_px_s, "velocity_px_s"),
            (self.hip_height_px, "hip_height_px"),
            (self.ankle_height_px, "ankle_height_px"),
            (self.phase, "phase"),
            (self.start_x_px, "start_x_px"),
        ] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite")));
            }
        }
        if !(self.noise_px.is_finite() && self.noise_px >= 0.0) {
            return Err(Error::Validation("noise_px must be >= 0".into()));
        }
        if !(self.swing_lift_px.is_finite() && self.swing_lift_px >= 0.0) {
            return Err(Error::Validation("swing_lift_px must be >= 0".into()));
        }
        if self.ankle_height_px <= self.hip_height_px {
            return Err(Error::Validation("ankles must sit below the hip".into()));
        }
        Ok(())
    }

    fn leg_phase(&self, leg: Leg) -> f64 {
        match leg {
            Leg::Left => self.phase,
            Leg::Right => self.phase + PI,
        }
    }

    /// Cycle position of `leg` at time `t`, in `[0, 1)`.
    fn cycle_position(&self, leg: Leg, t: f64) -> f64 {
        let v = self.cadence_hz * t + (self.leg_phase(leg) - PI / 2.0) / (2.0 * PI);
        v - math::floor(v)
    }

    /// Noise-free joint positions at time `t`.
    pub fn pose_at(&self, t: f64) -> [(Joint, f64, f64); 6] {
        let hip_x = self.start_x_px + self.velocity_px_s * t;
        let hip_y = self.hip_height_px;
        let s = self.direction().sign();
        let a = self.amplitude();
        let b = self.stance_fraction;
        let ankle = |leg| {
            let u = self.cycle_position(leg, t);
            let lift = if u > b {
                self.swing_lift_px * math::sin(PI * (u - b) / (1.0 - b))
            } else {
                0.0
            };
            (hip_x + s * a * self.profile(u), self.ankle_height_px - lift)
        };
        let (lx, ly) = ankle(Leg::Left);
        let (rx, ry) = ankle(Leg::Right);
        let neck_y = 2.0 * hip_y - self.ankle_height_px;
        [
            (Joint::Neck, hip_x, neck_y),
            (Joint::MidHip, hip_x, hip_y),
            (Joint::LKnee, 0.5 * (hip_x + lx), 0.5 * (hip_y + ly)),
            (Joint::RKnee, 0.5 * (hip_x + rx), 0.5 * (hip_y + ry)),
            (Joint::LAnkle, lx, ly),
            (Joint::RAnkle, rx, ry),
        ]
    }

    /// Analytic event times of `leg` in `[t0, t1]`.
    fn event_times(&self, leg: Leg, kind: EventKind, t0: f64, t1: f64) -> Vec<f64> {
        let offset = match kind {
            EventKind::HeelStrike => 0.0,
            EventKind::ToeOff => self.stance_fraction,
        };
        // Event k happens when cadence * t + c0 = k + offset.
        let c0 = (self.leg_phase(leg) - PI / 2.0) / (2.0 * PI);
        let first = math::ceil(self.cadence_hz * t0 + c0 - offset) as i64;
        let mut out = Vec::new();
        let mut k = first;
        loop {
            let t = (k as f64 + offset - c0) / self.cadence_hz;
            if t > t1 {
                break;
            }
            if t >= t0 {
                out.push(t);
            }
            k += 1;
        }
        out
    }
}

/// Expected per-cycle features of a noise-free walker. Both legs share the
/// same values; double support is absent when the stance fraction is one
/// half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFeatures {
    pub step_time_s: f64,
    pub stance_time_s: f64,
    pub swing_time_s: f64,
    pub stride_time_s: f64,
    pub double_support_s: Option<f64>,
    pub step_length_px: f64,
    /// Tolerance on every duration: two frame-durations.
    pub time_tolerance_s: f64,
    /// Tolerance on step length before calibration.
    pub length_tolerance_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub subject_id: String,
    pub direction: WalkDirection,
    /// Events whose two bracketing samples both lie strictly inside the
    /// clip, so a detector can see them as interior extrema.
    pub events: Vec<GaitEvent>,
    /// Events within one frame of either clip edge; detecting them or not
    /// are both acceptable.
    pub boundary_events: Vec<GaitEvent>,
    pub features: ExpectedFeatures,
}

/// Samples `spec` at `fps` for `duration_s` seconds. Observation jitter of
/// `noise_px` (Gaussian) is seeded by `seed` and never reaches the ground
/// truth.
pub fn generate_walker(spec: &WalkerSpec, duration_s: f64, fps: f64, seed: u64) -> Result<(KeypointSequence, GroundTruth)> {
    spec.validate()?;
    if !(fps.is_finite() && fps > 0.0 && duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Validation("fps and duration_s must be > 0".into()));
    }
    let n = math::round(duration_s * fps) as u64;
    if n < 3 {
        return Err(Error::Validation(format!(
            "duration_s * fps must be >= 3, got {}",
            duration_s * fps
        )));
    }
    let mut jitter = (spec.noise_px > 0.0).then(|| NoiseSampler::new(Distribution::Normal, spec.noise_px, seed));
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / fps;
            let keypoints = spec
                .pose_at(t)
                .into_iter()
                .map(|(joint, x, y)| match jitter.as_mut() {
                    Some(j) => {
                        let dx = j.sample();
                        let dy = j.sample();
                        Keypoint::new(joint, x + dx, y + dy, 1.0)
                    }
                    None => Keypoint::new(joint, x, y, 1.0),
                })
                .collect();
            KeypointFrame {
                frame_index: i,
                timestamp_s: t,
                poses: alloc::vec![PersonPose {
                    person_index: 0,
                    keypoints,
                }],
            }
        })
        .collect();
    let seq = KeypointSequence {
        subject_id: spec.subject_id.clone(),
        sequence_id: format!("{}-{seed:016x}", spec.subject_id),
        fps,
        frames,
    };

    let last = (n - 1) as f64;
    let mut events = Vec::new();
    let mut boundary_events = Vec::new();
    for leg in [Leg::Left, Leg::Right] {
        for kind in [EventKind::HeelStrike, EventKind::ToeOff] {
            for t in spec.event_times(leg, kind, 0.0, last / fps) {
                let pos = t * fps;
                let frame_index = math::round(pos) as u64;
                let ev = GaitEvent {
                    leg,
                    kind,
                    time_s: t,
                    frame_index,
                };
                if math::floor(pos) >= 1.0 && math::ceil(pos) <= last - 1.0 {
                    events.push(ev);
                } else {
                    boundary_events.push(ev);
                }
            }
        }
    }
    let by_time = |a: &GaitEvent, b: &GaitEvent| a.time_s.total_cmp(&b.time_s).then(a.leg.cmp(&b.leg));
    events.sort_by(by_time);
    boundary_events.sort_by(by_time);

    let c = spec.cadence_hz;
    let b = spec.stance_fraction;
    let ds = (b - 0.5) / c;
    let truth = GroundTruth {
        subject_id: spec.subject_id.clone(),
        direction: spec.direction(),
        events,
        boundary_events,
        features: ExpectedFeatures {
            step_time_s: 0.5 / c,
            stance_time_s: b / c,
            swing_time_s: (1.0 - b) / c,
            stride_time_s: 1.0 / c,
            double_support_s: (ds > 0.0).then_some(ds),
            step_length_px: spec.amplitude() * spec.separation_ratio(),
            time_tolerance_s: 2.0 / fps,
            length_tolerance_px: 2.0,
        },
    };
    Ok((seq, truth))
}

/// Exchanges the ankle labels on a random `fraction` of frames (never the
/// first). Returns the altered sequence and the swapped frame indices.
pub fn swap_random_frames(seq: &KeypointSequence, fraction: f64, seed: u64) -> (KeypointSequence, Vec<u64>) {
    use rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = seq.clone();
    let mut swapped = Vec::new();
    for frame in out.frames.iter_mut().skip(1) {
        if crate::mitigate::unit_open(&mut rng) >= fraction {
            continue;
        }
        if let Some(pose) = frame.subject_mut() {
            crate::gait::swap_ankles(pose);
            swapped.push(frame.frame_index);
        }
    }
    (out, swapped)
}

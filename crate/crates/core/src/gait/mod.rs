//! Gait feature extraction from 2D keypoint sequences.
//!
//! The pipeline is: walking-direction detection, left/right ankle label
//! correction, heel-strike/toe-off detection on the ankle-minus-midhip
//! horizontal excursion, full-cycle validation, and per-cycle features.

mod direction;
mod events;
mod features;
mod legs;
mod signal;

use alloc::string::String;

use serde::{Deserialize, Serialize};

pub use direction::detect_direction;
pub use events::{detect_events, find_peaks, validate_full_cycle};
pub use features::{extract_features, ExtractionReport, GaitFeatureRow, FEATURE_NAMES, STEP_LENGTH_FEATURES};
pub use legs::correct_leg_labels;
pub(crate) use legs::swap_ankles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WalkDirection {
    LeftToRight,
    RightToLeft,
}

impl WalkDirection {
    /// +1 when walking toward increasing x.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            WalkDirection::LeftToRight => 1.0,
            WalkDirection::RightToLeft => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    HeelStrike,
    ToeOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub leg: Leg,
    pub kind: EventKind,
    pub time_s: f64,
    pub frame_index: u64,
}

/// Peak detection and gap handling knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    /// Minimum peak prominence as a fraction of the segment's max - min.
    pub min_prominence_frac: f64,
    /// Minimum separation between same-kind events of one leg, seconds.
    pub min_separation_s: f64,
    /// Longest run of missing frames bridged by linear interpolation.
    pub max_gap_frames: usize,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            min_prominence_frac: 0.1,
            min_separation_s: 0.25,
            max_gap_frames: 5,
        }
    }
}

/// Reason attached to rejected sequences.
pub(crate) fn no_cycle_reason() -> String {
    String::from("not enough data for a full gait cycle")
}

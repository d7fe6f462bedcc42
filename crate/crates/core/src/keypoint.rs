//! Pose keypoints, walking sequences, marker calibration and RGB frames.
//!
//! Image coordinates have their origin at the top-left corner with `y`
//! growing downward. A keypoint with confidence 0 is missing and its
//! coordinates are ignored.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Joint label. The labels this crate reasons about are named variants;
/// anything else is carried through untouched.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Joint {
    Neck,
    MidHip,
    LKnee,
    RKnee,
    LAnkle,
    RAnkle,
    Other(String),
}

impl Joint {
    pub fn as_str(&self) -> &str {
        match self {
            Joint::Neck => "Neck",
            Joint::MidHip => "MidHip",
            Joint::LKnee => "LKnee",
            Joint::RKnee => "RKnee",
            Joint::LAnkle => "LAnkle",
            Joint::RAnkle => "RAnkle",
            Joint::Other(name) => name,
        }
    }
}

impl From<String> for Joint {
    fn from(name: String) -> Self {
        match name.as_str() {
            "Neck" => Joint::Neck,
            "MidHip" => Joint::MidHip,
            "LKnee" => Joint::LKnee,
            "RKnee" => Joint::RKnee,
            "LAnkle" => Joint::LAnkle,
            "RAnkle" => Joint::RAnkle,
            _ => Joint::Other(name),
        }
    }
}

impl From<&str> for Joint {
    fn from(name: &str) -> Self {
        Joint::from(name.to_owned())
    }
}

impl From<Joint> for String {
    fn from(joint: Joint) -> Self {
        match joint {
            Joint::Other(name) => name,
            other => other.as_str().to_owned(),
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: Joint,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(name: impl Into<Joint>, x: f64, y: f64, confidence: f64) -> Self {
        Keypoint {
            name: name.into(),
            x,
            y,
            confidence,
        }
    }

    pub fn missing(name: impl Into<Joint>) -> Self {
        Keypoint::new(name, 0.0, 0.0, 0.0)
    }

    #[inline]
    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Validation(format!(
                "keypoint {} confidence {} outside [0, 1]",
                self.name, self.confidence
            )));
        }
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Validation(format!(
                "keypoint {} has non-finite coordinates",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonPose {
    pub person_index: u32,
    pub keypoints: Vec<Keypoint>,
}

impl PersonPose {
    pub fn get(&self, joint: &Joint) -> Option<&Keypoint> {
        self.keypoints.iter().find(|k| &k.name == joint)
    }

    pub fn get_mut(&mut self, joint: &Joint) -> Option<&mut Keypoint> {
        self.keypoints.iter_mut().find(|k| &k.name == joint)
    }

    /// Present (non-zero confidence) keypoint for `joint`.
    pub fn present(&self, joint: &Joint) -> Option<&Keypoint> {
        self.get(joint).filter(|k| k.is_present())
    }

    fn validate(&self) -> Result<()> {
        for (i, kp) in self.keypoints.iter().enumerate() {
            kp.validate()?;
            if self.keypoints[..i].iter().any(|k| k.name == kp.name) {
                return Err(Error::Validation(format!(
                    "person {} has duplicate joint {}",
                    self.person_index, kp.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub poses: Vec<PersonPose>,
}

impl KeypointFrame {
    /// The tracked subject: person 0 if present, otherwise the first pose.
    pub fn subject(&self) -> Option<&PersonPose> {
        self.poses
            .iter()
            .find(|p| p.person_index == 0)
            .or_else(|| self.poses.first())
    }

    pub fn subject_mut(&mut self) -> Option<&mut PersonPose> {
        let idx = self
            .poses
            .iter()
            .position(|p| p.person_index == 0)
            .or(if self.poses.is_empty() { None } else { Some(0) })?;
        self.poses.get_mut(idx)
    }
}

/// Header line of a keypoint sequence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceHeader {
    pub subject_id: String,
    pub sequence_id: String,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSequence {
    pub subject_id: String,
    pub sequence_id: String,
    pub fps: f64,
    pub frames: Vec<KeypointFrame>,
}

impl KeypointSequence {
    pub fn header(&self) -> SequenceHeader {
        SequenceHeader {
            subject_id: self.subject_id.clone(),
            sequence_id: self.sequence_id.clone(),
            fps: self.fps,
        }
    }

    /// Sorts frames by index and checks every invariant: positive fps,
    /// strictly increasing frame indices, non-decreasing timestamps, valid
    /// keypoints and at most one keypoint per joint per person.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Validation(format!("fps must be > 0, got {}", self.fps)));
        }
        self.frames.sort_by_key(|f| f.frame_index);
        for w in self.frames.windows(2) {
            if w[0].frame_index == w[1].frame_index {
                return Err(Error::Validation(format!(
                    "duplicate frame_index {}",
                    w[0].frame_index
                )));
            }
            if w[1].timestamp_s < w[0].timestamp_s {
                return Err(Error::Validation(format!(
                    "timestamp decreases at frame_index {}",
                    w[1].frame_index
                )));
            }
        }
        for frame in &self.frames {
            if !frame.timestamp_s.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite timestamp at frame_index {}",
                    frame.frame_index
                )));
            }
            for pose in &frame.poses {
                pose.validate()?;
            }
        }
        Ok(self)
    }

    /// Frame duration in seconds.
    #[inline]
    pub fn frame_duration(&self) -> f64 {
        1.0 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerCalibration {
    pub marker_a_x: f64,
    pub marker_b_x: f64,
    pub real_distance_m: f64,
}

impl MarkerCalibration {
    pub fn new(marker_a_x: f64, marker_b_x: f64, real_distance_m: f64) -> Self {
        MarkerCalibration {
            marker_a_x,
            marker_b_x,
            real_distance_m,
        }
    }
}

/// Meters represented by one horizontal pixel, from two markers a known
/// distance apart.
pub fn meters_per_pixel(cal: &MarkerCalibration) -> Result<f64> {
    if !(cal.real_distance_m.is_finite() && cal.real_distance_m > 0.0) {
        return Err(Error::Validation(format!(
            "real_distance_m must be > 0, got {}",
            cal.real_distance_m
        )));
    }
    let px = (cal.marker_a_x - cal.marker_b_x).abs();
    if !px.is_finite() {
        return Err(Error::Validation("marker positions must be finite".to_string()));
    }
    if px == 0.0 {
        return Err(Error::DegenerateCalibration { x: cal.marker_a_x });
    }
    Ok(cal.real_distance_m / px)
}

/// RGB8 raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_id: u32,
    pub width: u32,
    pub height: u32,
    pub timestamp_us: u64,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(frame_id: u32, width: u32, height: u32, timestamp_us: u64, pixels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::Shape {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Frame {
            frame_id,
            width,
            height,
            timestamp_us,
            pixels,
        })
    }

    pub fn filled(frame_id: u32, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Frame {
            frame_id,
            width,
            height,
            timestamp_us: 0,
            pixels,
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

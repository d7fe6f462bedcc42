use alloc::string::ToString;

use super::WalkDirection;
use crate::keypoint::{Joint, KeypointSequence};
use crate::{Error, Result};

/// Walking direction from the net MidHip displacement between the first and
/// last frames where MidHip is observed.
pub fn detect_direction(seq: &KeypointSequence) -> Result<WalkDirection> {
    let mut hips = seq
        .frames
        .iter()
        .filter_map(|f| f.subject().and_then(|p| p.present(&Joint::MidHip)).map(|k| k.x));
    let first = hips.next();
    let last = hips.next_back();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::InsufficientData(
            "fewer than 2 frames with an observed MidHip".to_string(),
        ));
    };
    let displacement = last - first;
    if displacement.abs() < 1.0 {
        return Err(Error::AmbiguousDirection {
            displacement_px: displacement,
        });
    }
    Ok(if displacement > 0.0 {
        WalkDirection::LeftToRight
    } else {
        WalkDirection::RightToLeft
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoint::{Keypoint, KeypointFrame, PersonPose};
    use alloc::vec;
    use alloc::vec::Vec;

    fn seq_with_hips(xs: &[f64]) -> KeypointSequence {
        let frames: Vec<KeypointFrame> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| KeypointFrame {
                frame_index: i as u64,
                timestamp_s: i as f64 / 30.0,
                poses: vec![PersonPose {
                    person_index: 0,
                    keypoints: vec![Keypoint::new("MidHip", x, 100.0, 1.0)],
                }],
            })
            .collect();
        KeypointSequence {
            subject_id: "s".into(),
            sequence_id: "q".into(),
            fps: 30.0,
            frames,
        }
    }

    #[test]
    fn sign_of_displacement() {
        assert_eq!(detect_direction(&seq_with_hips(&[10.0, 150.0, 300.0])).unwrap(), WalkDirection::LeftToRight);
        assert_eq!(detect_direction(&seq_with_hips(&[300.0, 150.0, 10.0])).unwrap(), WalkDirection::RightToLeft);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            detect_direction(&seq_with_hips(&[10.0])),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            detect_direction(&seq_with_hips(&[10.0, 40.0, 10.5])),
            Err(Error::AmbiguousDirection { .. })
        ));
    }
}

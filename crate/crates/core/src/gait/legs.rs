use crate::keypoint::{Joint, KeypointSequence, PersonPose};

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    crate::math::sqrt((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1))
}

fn ankles(pose: &PersonPose) -> (Option<Point>, Option<Point>) {
    let p = |j: &Joint| pose.present(j).map(|k| (k.x, k.y));
    (p(&Joint::LAnkle), p(&Joint::RAnkle))
}

/// Exchanges the left and right ankle observations of a pose.
pub(crate) fn swap_ankles(pose: &mut PersonPose) {
    let li = pose.keypoints.iter().position(|k| k.name == Joint::LAnkle);
    let ri = pose.keypoints.iter().position(|k| k.name == Joint::RAnkle);
    match (li, ri) {
        (Some(l), Some(r)) => {
            let (lk, rk) = (pose.keypoints[l].clone(), pose.keypoints[r].clone());
            let a = &mut pose.keypoints[l];
            a.x = rk.x;
            a.y = rk.y;
            a.confidence = rk.confidence;
            let b = &mut pose.keypoints[r];
            b.x = lk.x;
            b.y = lk.y;
            b.confidence = lk.confidence;
        }
        (Some(l), None) => pose.keypoints[l].name = Joint::RAnkle,
        (None, Some(r)) => pose.keypoints[r].name = Joint::LAnkle,
        (None, None) => {}
    }
}

/// Re-labels ankles frame by frame so that each frame keeps the labeling
/// (as-is or swapped) with the smaller summed displacement from the last
/// known left and right ankle positions. The first frame with an observed
/// ankle is taken as given; ties keep the original labels.
pub fn correct_leg_labels(seq: &KeypointSequence) -> KeypointSequence {
    let mut out = seq.clone();
    let mut last_l: Option<Point> = None;
    let mut last_r: Option<Point> = None;
    for frame in &mut out.frames {
        let Some(pose) = frame.subject_mut() else { continue };
        let (l, r) = ankles(pose);
        if l.is_none() && r.is_none() {
            continue;
        }
        let cost = |a: Option<Point>, b: Option<Point>| -> Option<f64> {
            match (a, b) {
                (Some(a), Some(b)) => Some(dist(a, b)),
                _ => None,
            }
        };
        // Sum only the terms computable for both labelings.
        let mut keep = 0.0;
        let mut swap = 0.0;
        let mut comparable = false;
        if let (Some(c_keep), Some(c_swap)) = (cost(l, last_l), cost(l, last_r)) {
            keep += c_keep;
            swap += c_swap;
            comparable = true;
        }
        if let (Some(c_keep), Some(c_swap)) = (cost(r, last_r), cost(r, last_l)) {
            keep += c_keep;
            swap += c_swap;
            comparable = true;
        }
        let (l, r) = if comparable && swap < keep {
            swap_ankles(pose);
            (r, l)
        } else {
            (l, r)
        };
        if l.is_some() {
            last_l = l;
        }
        if r.is_some() {
            last_r = r;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoint::{Keypoint, KeypointFrame};
    use alloc::vec;
    use alloc::vec::Vec;

    type Point = (f64, f64);

    fn seq(ankles: &[(Point, Point)]) -> KeypointSequence {
        let frames: Vec<KeypointFrame> = ankles
            .iter()
            .enumerate()
            .map(|(i, &(l, r))| KeypointFrame {
                frame_index: i as u64,
                timestamp_s: i as f64 / 30.0,
                poses: vec![PersonPose {
                    person_index: 0,
                    keypoints: vec![
                        Keypoint::new("MidHip", 100.0, 100.0, 1.0),
                        Keypoint::new("LAnkle", l.0, l.1, 1.0),
                        Keypoint::new("RAnkle", r.0, r.1, 1.0),
                    ],
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
    fn no_swaps_is_identity() {
        let s = seq(&[((80.0, 180.0), (120.0, 180.0)), ((82.0, 180.0), (118.0, 180.0))]);
        assert_eq!(correct_leg_labels(&s), s);
    }

    #[test]
    fn exchanged_labels_are_restored() {
        let truth = seq(&[((80.0, 180.0), (120.0, 180.0)), ((81.0, 180.0), (119.0, 180.0))]);
        let swapped = seq(&[((80.0, 180.0), (120.0, 180.0)), ((119.0, 180.0), (81.0, 180.0))]);
        assert_eq!(correct_leg_labels(&swapped), truth);
    }

    #[test]
    fn single_ankle_frames_follow_nearest() {
        let mut s = seq(&[((80.0, 180.0), (120.0, 180.0)), ((0.0, 0.0), (0.0, 0.0))]);
        // Frame 2 only sees one ankle, labelled left but sitting where the right was.
        let pose = &mut s.frames[1].poses[0];
        pose.keypoints[1] = Keypoint::new("LAnkle", 121.0, 180.0, 1.0);
        pose.keypoints[2] = Keypoint::missing("RAnkle");
        let out = correct_leg_labels(&s);
        let p = &out.frames[1].poses[0];
        assert!(p.present(&Joint::LAnkle).is_none());
        assert_eq!(p.present(&Joint::RAnkle).unwrap().x, 121.0);
    }
}

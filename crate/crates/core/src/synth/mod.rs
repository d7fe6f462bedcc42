//! Synthetic walkers with closed-form gait events, a colored-marker frame
//! renderer and a marker keypoint extractor.
//!
//! Together they close the loop keypoints -> frames -> mitigation ->
//! keypoints without a pose-estimation model.

mod render;
mod walker;

pub use render::{
    extract_markers, extract_sequence, render_frame, render_frames, MarkerExtractor, RenderStyle, RenderedClip,
    FALLBACK_CONFIDENCE,
};
pub use walker::{generate_walker, swap_random_frames, ExpectedFeatures, GroundTruth, WalkerSpec};

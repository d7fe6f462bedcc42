use serde_json::json;

use gaitguard_core::derive_seed;
use gaitguard_core::synth::{generate_walker, render_frames, swap_random_frames, RenderStyle, WalkerSpec};

use super::args::{FormatArg, SynthArgs};
use super::{emit, Ctx};
use crate::error::{AppError, AppResult};
use crate::io::frames::{frame_stem, write_frame, FrameFormat};
use crate::io::keypoints::write_keypoint_sequence;
use crate::io::regions::write_regions;
use crate::io::{read_json, to_json_pretty, write_file};

/// Writes, per walker `i`, `<subject>_<i>.jsonl`, `.regions.jsonl`,
/// `.truth.json` and `frames/<subject>_<i>/frame_NNNNNN.<ext>`.
pub fn run(a: SynthArgs, ctx: &Ctx) -> AppResult<()> {
    let specs: Vec<WalkerSpec> = read_json(&a.spec)?;
    if specs.is_empty() {
        return Err(AppError::validation("invalid_spec", "walker list is empty"));
    }
    if !(0.0..=1.0).contains(&a.swap_fraction) {
        return Err(AppError::validation("config", "--swap-fraction must be in [0, 1]"));
    }
    let out = ctx.out(&a.out);
    let style = RenderStyle::new(a.width, a.height);
    let format = match a.format {
        FormatArg::Png => FrameFormat::Png,
        FormatArg::Rgb => FrameFormat::Rgb,
    };
    let mut frames_written = 0usize;
    let mut clipped = 0usize;
    let mut stems = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let seed = derive_seed(ctx.seed, i as u64);
        let (mut seq, truth) = generate_walker(spec, a.duration, a.fps, seed)?;
        let mut swapped = Vec::new();
        if a.swap_fraction > 0.0 {
            (seq, swapped) = swap_random_frames(&seq, a.swap_fraction, derive_seed(seed, 1));
        }
        let stem = format!("{}_{i:03}", spec.subject_id);
        write_keypoint_sequence(&out.join(format!("{stem}.jsonl")), &seq)?;
        let truth_json = json!({ "truth": truth, "swapped_frames": swapped, "seed": seed });
        write_file(&out.join(format!("{stem}.truth.json")), to_json_pretty(&truth_json).as_bytes())?;
        let clip = render_frames(&seq, &style);
        clipped += clip.clipped_markers;
        write_regions(&out.join(format!("{stem}.regions.jsonl")), &clip.regions)?;
        if !a.no_frames {
            let dir = out.join("frames").join(&stem);
            for f in &clip.frames {
                write_frame(&dir, &frame_stem(f.frame_id), f, format)?;
            }
            frames_written += clip.frames.len();
        }
        stems.push(stem);
    }
    if clipped > 0 {
        log::warn!("{clipped} markers fell outside the canvas");
    }
    emit(&json!({
        "walkers": stems.len(),
        "clips": stems,
        "frames": frames_written,
        "clipped_markers": clipped,
        "out": out,
    }))
}

use serde_json::json;

use gaitguard_core::mitigate::{mitigate_frame, snr_db, MitigationStatus};

use super::args::{FormatArg, MitigateArgs};
use super::{emit, Ctx};
use crate::error::AppResult;
use crate::io::frames::{read_frames, write_frame, FrameFormat};
use crate::io::regions::{read_regions, RegionMap};
use crate::io::{to_json_pretty, write_file};

pub(crate) fn status_json(status: &MitigationStatus) -> serde_json::Value {
    match status {
        MitigationStatus::Applied { pixels } => json!({ "status": "applied", "pixels": pixels }),
        MitigationStatus::Disabled => json!({ "status": "disabled" }),
        MitigationStatus::NoTarget(why) => json!({ "status": "no_target", "detail": why }),
    }
}

pub fn run(a: MitigateArgs, ctx: &Ctx) -> AppResult<()> {
    let cfg = a.noise.config(ctx.seed)?;
    let regions = match &a.regions {
        Some(p) => read_regions(p)?,
        None => RegionMap::new(),
    };
    let frames = read_frames(&a.input, a.fps)?;
    let out_dir = ctx.out(&a.out);
    let mut per_frame = Vec::with_capacity(frames.len());
    let mut applied = 0usize;
    for f in &frames {
        let region = regions.get(&f.frame.frame_id);
        let (out, status) = mitigate_frame(&f.frame, region, &cfg);
        if let MitigationStatus::NoTarget(why) = status {
            log::warn!("frame {}: left unchanged: {why}", f.frame.frame_id);
        }
        if matches!(status, MitigationStatus::Applied { .. }) {
            applied += 1;
        }
        let format = match a.format {
            Some(FormatArg::Png) => FrameFormat::Png,
            Some(FormatArg::Rgb) => FrameFormat::Rgb,
            None => f.format,
        };
        let stem = f
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| crate::io::frames::frame_stem(f.frame.frame_id));
        write_frame(&out_dir, &stem, &out, format)?;
        let snr = region
            .and_then(|r| r.boxes.first())
            .and_then(|b| snr_db(&f.frame, &out, b).ok())
            .map(|s| if s.is_finite() { json!(s) } else { json!("inf") });
        let mut entry = status_json(&status);
        entry["frame_id"] = json!(f.frame.frame_id);
        entry["snr_db"] = snr.unwrap_or(serde_json::Value::Null);
        per_frame.push(entry);
    }
    if let Some(p) = &a.report {
        let report = json!({ "config": cfg, "frames": per_frame });
        write_file(&ctx.out(p), to_json_pretty(&report).as_bytes())?;
    }
    emit(&json!({ "frames": frames.len(), "applied": applied, "out": out_dir }))
}

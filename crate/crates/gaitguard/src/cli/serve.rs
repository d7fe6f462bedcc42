use std::io::Write;
use std::sync::Arc;

use serde_json::json;

use super::args::{ReplayArgs, ServeArgs};
use super::{emit, Ctx};
use crate::error::{AppError, AppResult};
use crate::io::frames::{frame_stem, read_frames, write_frame};
use crate::io::regions::{read_regions, RegionMap};
use crate::io::{to_json_pretty, write_file};
use crate::replay::{replay, ReplayOptions};
use crate::server::{Server, ServerOptions};

pub fn run_serve(a: ServeArgs, ctx: &Ctx) -> AppResult<()> {
    let config = a.noise.config(ctx.seed)?;
    let regions = match &a.regions {
        Some(p) => read_regions(p)?,
        None => RegionMap::new(),
    };
    if !(a.window.is_finite() && a.window > 0.0) {
        return Err(AppError::validation("config", "--window must be > 0"));
    }
    let opts = ServerOptions {
        config,
        regions: Arc::new(regions),
        max_payload: a.max_payload,
        meter_window_s: a.window,
        max_connections: a.max_connections,
    };
    let server = Server::bind(a.bind.as_str(), opts).map_err(|e| AppError::io("bind", format!("{}: {e}", a.bind)))?;
    let addr = server.local_addr()?;
    emit(&json!({ "listening": addr.to_string() }))?;
    log::info!("listening on {addr}");
    server.run()?;
    Ok(())
}

pub fn run_replay(a: ReplayArgs, ctx: &Ctx) -> AppResult<()> {
    if !(a.fps.is_finite() && a.fps > 0.0) {
        return Err(AppError::validation("config", "--fps must be > 0"));
    }
    let files = read_frames(&a.frames, a.fps)?;
    let regions = a.regions.as_deref().map(read_regions).transpose()?;
    let frames: Vec<_> = files.iter().map(|f| f.frame.clone()).collect();
    let opts = ReplayOptions {
        fps: a.fps,
        config_json: a.set.clone(),
        ..ReplayOptions::default()
    };
    let (report, replies) = replay(a.connect.as_str(), &frames, regions.as_ref(), &opts)?;
    if let Some(dir) = &a.out {
        let dir = ctx.out(dir);
        for (reply, file) in replies.iter().zip(&files) {
            let stem = file
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| frame_stem(reply.frame_id));
            write_frame(&dir, &stem, reply, file.format)?;
        }
    }
    let text = to_json_pretty(&report);
    match &a.report {
        Some(p) => write_file(&ctx.out(p), text.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    if report.lost > 0 || report.out_of_order > 0 {
        return Err(AppError::io(
            "frame_loss",
            format!("{} frames lost, {} out of order", report.lost, report.out_of_order),
        ));
    }
    Ok(())
}

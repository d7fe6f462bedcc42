//! Replay client: streams frames from disk to a server at a fixed rate and
//! collects the mitigated replies.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use gaitguard_core::keypoint::Frame;
use gaitguard_core::stream::{MeterSnapshot, Message, MsgType};

use crate::error::{AppError, AppResult};
use crate::io::regions::RegionMap;
use crate::server::{read_message, write_message, ReadError};

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub fps: f64,
    /// Config JSON sent before the first frame.
    pub config_json: Option<String>,
    pub read_timeout: Duration,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            fps: 30.0,
            config_json: None,
            read_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub sent: usize,
    pub received: usize,
    pub lost: usize,
    /// Replies that were not the expected frame in the expected order.
    pub out_of_order: usize,
    pub errors: Vec<String>,
    /// Send rate over the whole run.
    pub client_send_fps: f64,
    /// Reply rate over the whole run.
    pub client_receive_fps: f64,
    /// Server meter at the end of the run.
    pub server: Option<MeterSnapshot>,
}

fn wire(e: ReadError) -> AppError {
    match e {
        ReadError::Io(io) => AppError::io("io", io.to_string()),
        ReadError::Wire(w) => w.into(),
    }
}

fn rate(times: &[Instant]) -> f64 {
    match (times.first(), times.last()) {
        (Some(a), Some(b)) if times.len() > 1 && b > a => (times.len() - 1) as f64 / (*b - *a).as_secs_f64(),
        _ => 0.0,
    }
}

/// Streams `frames` in order, each with its region (if any) as a trailer,
/// then asks for server stats. Returns the report and the mitigated frames
/// in reply order.
pub fn replay(
    addr: impl ToSocketAddrs,
    frames: &[Frame],
    regions: Option<&RegionMap>,
    opts: &ReplayOptions,
) -> AppResult<(ReplayReport, Vec<Frame>)> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(opts.read_timeout))?;
    let mut reader = BufReader::with_capacity(1 << 16, stream.try_clone()?);
    let mut writer = BufWriter::with_capacity(1 << 16, stream);
    let mut errors = Vec::new();

    if let Some(json) = &opts.config_json {
        write_message(&mut writer, &Message::config_json(json.as_bytes()))?;
        let ack = read_message(&mut reader)
            .map_err(wire)?
            .ok_or_else(|| AppError::io("io", "server closed during config"))?;
        if ack.header.msg_type == MsgType::Error {
            return Err(AppError::validation(
                "bad_config",
                String::from_utf8_lossy(&ack.payload).into_owned(),
            ));
        }
    }

    let messages: Vec<Message> = frames
        .iter()
        .map(|f| Message::raw_frame(f, regions.and_then(|r| r.get(&f.frame_id))))
        .collect();
    let period = Duration::from_secs_f64(1.0 / opts.fps);
    let writer_thread = thread::spawn(move || -> std::io::Result<Vec<Instant>> {
        let start = Instant::now();
        let mut sent_at = Vec::with_capacity(messages.len());
        for (i, m) in messages.iter().enumerate() {
            let due = start + period * i as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
            write_message(&mut writer, m)?;
            sent_at.push(Instant::now());
        }
        write_message(&mut writer, &Message::stats_request())?;
        Ok(sent_at)
    });

    let mut out = Vec::with_capacity(frames.len());
    let mut received_at = Vec::with_capacity(frames.len());
    let mut out_of_order = 0;
    let mut server = None;
    let mut read_failure = None;
    while out.len() + errors.len() < frames.len() || server.is_none() {
        let msg = match read_message(&mut reader) {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                read_failure = Some(wire(e));
                break;
            }
        };
        match msg.header.msg_type {
            MsgType::MitigatedFrame => {
                let k = out.len() + errors.len();
                let expected = frames.get(k);
                if expected.map(|f| (f.frame_id, f.timestamp_us)) != Some((msg.header.frame_id, msg.header.timestamp_us)) {
                    out_of_order += 1;
                }
                let (frame, _) = msg.frame()?;
                received_at.push(Instant::now());
                out.push(frame);
            }
            MsgType::Stats => {
                server = serde_json::from_slice(&msg.payload).ok();
            }
            MsgType::Error => errors.push(String::from_utf8_lossy(&msg.payload).into_owned()),
            other => errors.push(format!("unexpected {other:?} reply")),
        }
    }
    let sent_at = writer_thread
        .join()
        .map_err(|_| AppError::io("io", "sender thread panicked"))?
        .map_err(AppError::from)?;
    if let Some(e) = read_failure {
        if out.len() < frames.len() {
            return Err(e);
        }
    }
    let report = ReplayReport {
        sent: sent_at.len(),
        received: out.len(),
        lost: sent_at.len().saturating_sub(out.len()),
        out_of_order,
        errors,
        client_send_fps: rate(&sent_at),
        client_receive_fps: rate(&received_at),
        server,
    };
    Ok((report, out))
}

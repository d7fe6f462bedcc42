//! Binary frame protocol and per-connection mitigation logic.
//!
//! Every message is a 28-byte little-endian header followed by the payload:
//!
//! | offset | size | field        |
//! |-------:|-----:|--------------|
//! | 0      | 4    | magic `GGF1` |
//! | 4      | 1    | version (1)  |
//! | 5      | 1    | message type |
//! | 6      | 2    | reserved (0) |
//! | 8      | 4    | frame_id     |
//! | 12     | 2    | width        |
//! | 14     | 2    | height       |
//! | 16     | 8    | timestamp_us |
//! | 24     | 4    | payload_len  |
//!
//! Frame payloads hold `width * height * 3` RGB bytes. A raw frame may
//! append a region trailer: a `u32` length and that many bytes of region
//! record JSON.

mod meter;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

pub use meter::{LatencyStats, MeterEvent, MeterSnapshot, ThroughputMeter};

use crate::keypoint::Frame;
use crate::mitigate::{mitigate_frame, MitigationStatus, NoiseConfig, RegionRecord};

pub const MAGIC: [u8; 4] = *b"GGF1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;
/// Default payload cap: a 4K RGB frame plus room for a region trailer.
pub const DEFAULT_MAX_PAYLOAD: u32 = 3840 * 2160 * 3 + (1 << 20);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("reserved field must be 0, got {0}")]
    NonzeroReserved(u16),
    #[error("payload of {len} bytes exceeds the {cap}-byte cap")]
    PayloadTooLarge { len: u32, cap: u32 },
    #[error("frame payload has {got} bytes, need at least {expected}")]
    ShortPayload { expected: usize, got: usize },
    #[error("bad region trailer: {0}")]
    BadTrailer(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("unexpected {0:?} message from client")]
    Unexpected(MsgType),
}

impl WireError {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::BadMagic(_) => "bad_magic",
            WireError::BadVersion(_) => "bad_version",
            WireError::UnknownType(_) => "unknown_type",
            WireError::NonzeroReserved(_) => "nonzero_reserved",
            WireError::PayloadTooLarge { .. } => "payload_too_large",
            WireError::ShortPayload { .. } => "short_payload",
            WireError::BadTrailer(_) => "bad_trailer",
            WireError::BadConfig(_) => "bad_config",
            WireError::Unexpected(_) => "unexpected_message",
        }
    }

    /// Whether the connection must be closed after reporting this error.
    pub fn is_fatal(&self) -> bool {
        matches!(self, WireError::BadMagic(_) | WireError::BadVersion(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    RawFrame = 0,
    MitigatedFrame = 1,
    Config = 2,
    Stats = 3,
    Error = 4,
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(v: u8) -> Result<Self, WireError> {
        Ok(match v {
            0 => MsgType::RawFrame,
            1 => MsgType::MitigatedFrame,
            2 => MsgType::Config,
            3 => MsgType::Stats,
            4 => MsgType::Error,
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub msg_type: MsgType,
    pub frame_id: u32,
    pub width: u16,
    pub height: u16,
    pub timestamp_us: u64,
    pub payload_len: u32,
}

impl Header {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5] = self.msg_type as u8;
        b[8..12].copy_from_slice(&self.frame_id.to_le_bytes());
        b[12..14].copy_from_slice(&self.width.to_le_bytes());
        b[14..16].copy_from_slice(&self.height.to_le_bytes());
        b[16..24].copy_from_slice(&self.timestamp_us.to_le_bytes());
        b[24..28].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    /// Parses a header. Magic and version are checked first, since after
    /// a mismatch nothing else can be trusted.
    pub fn decode(b: &[u8; HEADER_LEN]) -> Result<Header, WireError> {
        let magic = [b[0], b[1], b[2], b[3]];
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if b[4] != VERSION {
            return Err(WireError::BadVersion(b[4]));
        }
        let reserved = u16::from_le_bytes([b[6], b[7]]);
        let msg_type = MsgType::try_from(b[5])?;
        if reserved != 0 {
            return Err(WireError::NonzeroReserved(reserved));
        }
        Ok(Header {
            msg_type,
            frame_id: u32::from_le_bytes([b[8], b[9], b[10], b[11]]),
            width: u16::from_le_bytes([b[12], b[13]]),
            height: u16::from_le_bytes([b[14], b[15]]),
            timestamp_us: u64::from_le_bytes([b[16], b[17], b[18], b[19], b[20], b[21], b[22], b[23]]),
            payload_len: u32::from_le_bytes([b[24], b[25], b[26], b[27]]),
        })
    }

    /// Payload length field of a raw header, readable even when the rest of
    /// the header is rejected, so the payload can be skipped.
    pub fn raw_payload_len(b: &[u8; HEADER_LEN]) -> u32 {
        u32::from_le_bytes([b[24], b[25], b[26], b[27]])
    }

    /// Header of a message without frame metadata.
    pub fn control(msg_type: MsgType, payload_len: usize) -> Header {
        Header {
            msg_type,
            frame_id: 0,
            width: 0,
            height: 0,
            timestamp_us: 0,
            payload_len: payload_len as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl Message {
    fn new(mut header: Header, payload: Vec<u8>) -> Message {
        header.payload_len = payload.len() as u32;
        Message { header, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.encode());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Splits a complete encoded message.
    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::ShortPayload {
                expected: HEADER_LEN,
                got: bytes.len(),
            });
        }
        let mut h = [0u8; HEADER_LEN];
        h.copy_from_slice(&bytes[..HEADER_LEN]);
        let header = Header::decode(&h)?;
        let payload = bytes[HEADER_LEN..].to_vec();
        if payload.len() != header.payload_len as usize {
            return Err(WireError::ShortPayload {
                expected: header.payload_len as usize,
                got: payload.len(),
            });
        }
        Ok(Message { header, payload })
    }

    fn frame_message(msg_type: MsgType, frame: &Frame, payload: Vec<u8>) -> Message {
        Message::new(
            Header {
                msg_type,
                frame_id: frame.frame_id,
                width: frame.width as u16,
                height: frame.height as u16,
                timestamp_us: frame.timestamp_us,
                payload_len: 0,
            },
            payload,
        )
    }

    /// Raw frame, optionally carrying its region record as a trailer.
    pub fn raw_frame(frame: &Frame, region: Option<&RegionRecord>) -> Message {
        let mut payload = frame.pixels.clone();
        if let Some(r) = region {
            let json = serde_json::to_vec(r).unwrap_or_default();
            payload.extend_from_slice(&(json.len() as u32).to_le_bytes());
            payload.extend_from_slice(&json);
        }
        Message::frame_message(MsgType::RawFrame, frame, payload)
    }

    pub fn mitigated_frame(frame: &Frame) -> Message {
        Message::frame_message(MsgType::MitigatedFrame, frame, frame.pixels.clone())
    }

    /// Config message: a JSON object of the fields to change.
    pub fn config_json(json: &[u8]) -> Message {
        Message::new(Header::control(MsgType::Config, 0), json.to_vec())
    }

    pub fn config(cfg: &NoiseConfig) -> Message {
        Message::config_json(&serde_json::to_vec(cfg).unwrap_or_default())
    }

    pub fn stats_request() -> Message {
        Message::new(Header::control(MsgType::Stats, 0), Vec::new())
    }

    pub fn stats(snapshot: &MeterSnapshot) -> Message {
        Message::new(
            Header::control(MsgType::Stats, 0),
            serde_json::to_vec(snapshot).unwrap_or_default(),
        )
    }

    /// Error reply with payload `{"error": code, "detail": text}`.
    pub fn error(err: &WireError) -> Message {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            detail: String,
        }
        let body = Body {
            error: err.code(),
            detail: err.to_string(),
        };
        Message::new(
            Header::control(MsgType::Error, 0),
            serde_json::to_vec(&body).unwrap_or_default(),
        )
    }

    /// Decodes a frame payload into the raster and the optional trailer.
    pub fn frame(&self) -> Result<(Frame, Option<RegionRecord>), WireError> {
        let h = &self.header;
        let n = h.width as usize * h.height as usize * 3;
        if self.payload.len() < n {
            return Err(WireError::ShortPayload {
                expected: n,
                got: self.payload.len(),
            });
        }
        let frame = Frame {
            frame_id: h.frame_id,
            width: h.width as u32,
            height: h.height as u32,
            timestamp_us: h.timestamp_us,
            pixels: self.payload[..n].to_vec(),
        };
        let rest = &self.payload[n..];
        if rest.is_empty() {
            return Ok((frame, None));
        }
        if rest.len() < 4 {
            return Err(WireError::BadTrailer("truncated length prefix".into()));
        }
        let len = u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        if rest.len() - 4 != len {
            return Err(WireError::BadTrailer(format!(
                "declared {len} bytes, found {}",
                rest.len() - 4
            )));
        }
        let record: RegionRecord =
            serde_json::from_slice(&rest[4..]).map_err(|e| WireError::BadTrailer(e.to_string()))?;
        Ok((frame, Some(record)))
    }
}

/// Applies a Config payload (a JSON object of fields) on top of `current`.
/// The result must be a valid config; otherwise `current` stays in force.
pub fn apply_config(current: &NoiseConfig, json: &[u8]) -> Result<NoiseConfig, WireError> {
    let patch: serde_json::Value = serde_json::from_slice(json).map_err(|e| WireError::BadConfig(e.to_string()))?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(WireError::BadConfig("config must be a JSON object".into()));
    };
    let mut merged = serde_json::to_value(current).map_err(|e| WireError::BadConfig(e.to_string()))?;
    if let serde_json::Value::Object(m) = &mut merged {
        for (k, v) in patch {
            m.insert(k, v);
        }
    }
    let cfg: NoiseConfig = serde_json::from_value(merged).map_err(|e| WireError::BadConfig(e.to_string()))?;
    cfg.validate().map_err(|e| WireError::BadConfig(e.to_string()))?;
    Ok(cfg)
}

/// Mitigates a RawFrame message. The trailer region wins over `fallback`.
pub fn mitigate_message(
    msg: &Message,
    cfg: &NoiseConfig,
    fallback: Option<&RegionRecord>,
) -> Result<(Message, MitigationStatus), WireError> {
    let (frame, trailer) = msg.frame()?;
    let region = trailer.as_ref().or(fallback);
    let (out, status) = mitigate_frame(&frame, region, cfg);
    Ok((Message::mitigated_frame(&out), status))
}

/// Protocol state of one connection.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: NoiseConfig,
    pub max_payload: u32,
}

impl Session {
    pub fn new(config: NoiseConfig) -> Self {
        Session {
            config,
            max_payload: DEFAULT_MAX_PAYLOAD,
        }
    }

    /// Checks a decoded header against the payload cap.
    pub fn admit(&self, header: &Header) -> Result<(), WireError> {
        if header.payload_len > self.max_payload {
            return Err(WireError::PayloadTooLarge {
                len: header.payload_len,
                cap: self.max_payload,
            });
        }
        Ok(())
    }

    /// Reply to one well-formed, admitted message. Frames are mitigated with
    /// the trailer region or `region_for(frame_id)`; stats replies are built
    /// from `stats`.
    pub fn handle<'r>(
        &mut self,
        msg: &Message,
        region_for: impl FnOnce(u32) -> Option<&'r RegionRecord>,
        stats: impl FnOnce() -> MeterSnapshot,
    ) -> Message {
        let reply = match msg.header.msg_type {
            MsgType::RawFrame => {
                mitigate_message(msg, &self.config, region_for(msg.header.frame_id)).map(|(m, _)| m)
            }
            MsgType::Config => apply_config(&self.config, &msg.payload).map(|cfg| {
                self.config = cfg;
                Message::config(&cfg)
            }),
            MsgType::Stats => Ok(Message::stats(&stats())),
            other => Err(WireError::Unexpected(other)),
        };
        reply.unwrap_or_else(|e| Message::error(&e))
    }
}

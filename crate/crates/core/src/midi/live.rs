use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pairing::{RawKind, RawNote};

/// A raw channel-voice message with a host-supplied timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LiveMessage {
    pub status: u8,
    pub data1: u8,
    pub data2: u8,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LiveDecodeError {
    #[error("status byte {0:#04x} lacks the high bit")]
    NotAStatus(u8),
    #[error("data byte {0:#04x} has the high bit set")]
    BadData(u8),
    #[error("timestamp {0} is not a finite non-negative number")]
    BadTime(f64),
}

/// Decodes a live message. Non-note messages decode to `Ok(None)`.
pub fn decode_live(msg: &LiveMessage) -> Result<Option<RawNote>, LiveDecodeError> {
    if msg.status & 0x80 == 0 {
        return Err(LiveDecodeError::NotAStatus(msg.status));
    }
    if !msg.time.is_finite() || msg.time < 0.0 {
        return Err(LiveDecodeError::BadTime(msg.time));
    }
    let kind = match msg.status & 0xf0 {
        0x90 => RawKind::On,
        0x80 => RawKind::Off,
        _ => return Ok(None),
    };
    for b in [msg.data1, msg.data2] {
        if b & 0x80 != 0 {
            return Err(LiveDecodeError::BadData(b));
        }
    }
    Ok(Some(RawNote {
        kind,
        pitch: msg.data1,
        velocity: msg.data2,
        channel: msg.status & 0x0f,
        time: msg.time,
    }))
}

/// Encodes note messages as live messages, e.g. to replay a file as a live
/// session.
pub fn raw_notes_to_live(raw: &[RawNote]) -> Vec<LiveMessage> {
    raw.iter()
        .map(|r| LiveMessage {
            status: match r.kind {
                RawKind::On => 0x90,
                RawKind::Off => 0x80,
            } | (r.channel & 0x0f),
            data1: r.pitch & 0x7f,
            data2: r.velocity & 0x7f,
            time: r.time,
        })
        .collect()
}

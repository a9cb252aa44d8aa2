//! Standard MIDI File reader (formats 0 and 1).
//!
//! Ticks are converted to seconds by integrating the tempo map, and the note
//! messages of every track are merged into a single time-sorted list before
//! pairing.

use thiserror::Error;

use super::pairing::{pair_note_events, RawKind, RawNote};
use super::{IngestWarning, PerformanceStream, VoiceMap};

/// Tempo used until the first tempo meta event: 120 BPM.
pub const DEFAULT_TEMPO_US: u32 = 500_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmfError {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("unsupported SMF format {format} at byte {offset}")]
    UnsupportedFormat { offset: usize, format: u16 },
    #[error("track truncated at byte {offset}")]
    TruncatedTrack { offset: usize },
    #[error("invalid event at byte {offset}: {reason}")]
    InvalidEvent { offset: usize, reason: &'static str },
}

impl SmfError {
    pub fn offset(&self) -> usize {
        match *self {
            SmfError::MalformedHeader { offset, .. }
            | SmfError::UnsupportedFormat { offset, .. }
            | SmfError::TruncatedTrack { offset }
            | SmfError::InvalidEvent { offset, .. } => offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Division {
    TicksPerQuarter(u16),
    /// SMPTE time code: frames per second and ticks per frame.
    Smpte { fps: u8, ticks_per_frame: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmfHeader {
    pub format: u16,
    pub declared_tracks: u16,
    pub division: Division,
}

/// Piecewise-constant tempo over ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct TempoMap {
    division: Division,
    /// (tick, microseconds per quarter, seconds at that tick), sorted by tick.
    segments: Vec<(u64, u32, f64)>,
}

impl TempoMap {
    /// `changes` need not be sorted; later entries win on equal ticks.
    pub fn new(division: Division, changes: &[(u64, u32)]) -> Self {
        let mut sorted: Vec<(u64, u32)> = changes.to_vec();
        sorted.sort_by_key(|c| c.0);
        let mut segments: Vec<(u64, u32, f64)> = vec![(0, DEFAULT_TEMPO_US, 0.0)];
        for (tick, tempo) in sorted {
            let last = *segments.last().expect("non-empty");
            if tick == last.0 {
                segments.last_mut().expect("non-empty").1 = tempo;
            } else {
                let secs = last.2 + Self::span(division, tick - last.0, last.1);
                segments.push((tick, tempo, secs));
            }
        }
        TempoMap { division, segments }
    }

    fn span(division: Division, ticks: u64, tempo_us: u32) -> f64 {
        match division {
            Division::TicksPerQuarter(tpq) => {
                ticks as f64 * tempo_us as f64 / (tpq as f64 * 1_000_000.0)
            }
            Division::Smpte {
                fps,
                ticks_per_frame,
            } => {
                let fps = if fps == 29 { 29.97 } else { fps as f64 };
                ticks as f64 / (fps * ticks_per_frame as f64)
            }
        }
    }

    pub fn seconds_at(&self, tick: u64) -> f64 {
        let i = self.segments.partition_point(|s| s.0 <= tick) - 1;
        let (start, tempo, secs) = self.segments[i];
        secs + Self::span(self.division, tick - start, tempo)
    }

    /// Tempo changes as (tick, microseconds per quarter), including the
    /// implicit initial tempo.
    pub fn changes(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.segments.iter().map(|s| (s.0, s.1))
    }
}

/// Everything read from a file, before and after pairing.
#[derive(Debug, Clone)]
pub struct ParsedSmf {
    pub header: SmfHeader,
    pub tempo_map: TempoMap,
    /// Merged note messages with times in seconds.
    pub raw: Vec<RawNote>,
    pub stream: PerformanceStream,
    /// Largest absolute tick of any event, including end-of-track.
    pub last_tick: u64,
    /// Seconds at `last_tick`.
    pub duration: f64,
}

/// Parses an SMF with the default voice map (channel 10 drums).
pub fn parse_smf(bytes: &[u8]) -> Result<PerformanceStream, SmfError> {
    parse_smf_with(bytes, &VoiceMap::default()).map(|p| p.stream)
}

pub fn parse_smf_with(bytes: &[u8], voices: &VoiceMap) -> Result<ParsedSmf, SmfError> {
    let (header, tempo_map, raw, last_tick, anomalies) = read_smf_raw(bytes)?;
    let mut stream = pair_note_events(&raw, voices);
    stream
        .warnings
        .splice(0..0, anomalies.into_iter().map(|detail| IngestWarning::FileAnomaly { detail }));
    let duration = tempo_map.seconds_at(last_tick);
    Ok(ParsedSmf {
        header,
        tempo_map,
        raw,
        stream,
        last_tick,
        duration,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Absolute offset of `bytes[0]` in the file.
    base: usize,
}

impl<'a> Cursor<'a> {
    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn byte(&mut self, event_start: usize) -> Result<u8, SmfError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or(SmfError::TruncatedTrack {
                offset: event_start,
            })?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize, event_start: usize) -> Result<&'a [u8], SmfError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(SmfError::TruncatedTrack {
                offset: event_start,
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn vlq(&mut self, event_start: usize) -> Result<u32, SmfError> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.byte(event_start)?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(SmfError::InvalidEvent {
            offset: event_start,
            reason: "variable-length quantity longer than 4 bytes",
        })
    }
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

type RawRead = (SmfHeader, TempoMap, Vec<RawNote>, u64, Vec<String>);

/// Reads header, tempo map and merged note messages without pairing.
pub fn read_smf_raw(bytes: &[u8]) -> Result<RawRead, SmfError> {
    if bytes.len() < 14 {
        return Err(SmfError::MalformedHeader {
            offset: 0,
            reason: "file shorter than a header chunk",
        });
    }
    if &bytes[0..4] != b"MThd" {
        return Err(SmfError::MalformedHeader {
            offset: 0,
            reason: "missing MThd magic",
        });
    }
    let header_len = be_u32(&bytes[4..8]) as usize;
    if header_len < 6 {
        return Err(SmfError::MalformedHeader {
            offset: 4,
            reason: "header length below 6",
        });
    }
    let format = be_u16(&bytes[8..10]);
    if format > 1 {
        return Err(SmfError::UnsupportedFormat { offset: 8, format });
    }
    let declared_tracks = be_u16(&bytes[10..12]);
    let raw_div = be_u16(&bytes[12..14]);
    let division = if raw_div & 0x8000 != 0 {
        let fps = (-((raw_div >> 8) as u8 as i8)) as u8;
        let ticks_per_frame = (raw_div & 0xff) as u8;
        if ![24, 25, 29, 30].contains(&fps) || ticks_per_frame == 0 {
            return Err(SmfError::MalformedHeader {
                offset: 12,
                reason: "invalid SMPTE division",
            });
        }
        Division::Smpte {
            fps,
            ticks_per_frame,
        }
    } else if raw_div == 0 {
        return Err(SmfError::MalformedHeader {
            offset: 12,
            reason: "zero ticks per quarter note",
        });
    } else {
        Division::TicksPerQuarter(raw_div)
    };
    let header = SmfHeader {
        format,
        declared_tracks,
        division,
    };

    let mut pos = 8usize
        .checked_add(header_len)
        .filter(|&p| p <= bytes.len())
        .ok_or(SmfError::MalformedHeader {
            offset: 4,
            reason: "header length exceeds file",
        })?;

    let mut anomalies = Vec::new();
    // (tick, track, seq, note)
    let mut notes: Vec<(u64, usize, usize, RawKind, u8, u8, u8)> = Vec::new();
    let mut tempos: Vec<(u64, u32)> = Vec::new();
    let mut last_tick = 0u64;
    let mut tracks = 0usize;

    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            anomalies.push(format!("{} trailing bytes after last chunk", bytes.len() - pos));
            break;
        }
        let id = &bytes[pos..pos + 4];
        let len = be_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or(SmfError::TruncatedTrack { offset: pos })?;
        if id == b"MTrk" {
            let track_last = read_track(
                &bytes[body_start..body_end],
                body_start,
                tracks,
                &mut notes,
                &mut tempos,
            )?;
            last_tick = last_tick.max(track_last);
            tracks += 1;
        } else {
            anomalies.push(format!("skipped unknown chunk at byte {pos}"));
        }
        pos = body_end;
    }

    if tracks != declared_tracks as usize {
        anomalies.push(format!(
            "header declares {declared_tracks} tracks, found {tracks}"
        ));
    }
    if format == 0 && tracks > 1 {
        anomalies.push(format!("format 0 file with {tracks} tracks"));
    }

    let tempo_map = TempoMap::new(division, &tempos);
    notes.sort_by_key(|n| (n.0, n.1, n.2));
    let raw = notes
        .into_iter()
        .map(|(tick, _, _, kind, pitch, velocity, channel)| RawNote {
            kind,
            pitch,
            velocity,
            channel,
            time: tempo_map.seconds_at(tick),
        })
        .collect();
    Ok((header, tempo_map, raw, last_tick, anomalies))
}

fn read_track(
    body: &[u8],
    base: usize,
    track: usize,
    notes: &mut Vec<(u64, usize, usize, RawKind, u8, u8, u8)>,
    tempos: &mut Vec<(u64, u32)>,
) -> Result<u64, SmfError> {
    let mut cur = Cursor {
        bytes: body,
        pos: 0,
        base,
    };
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut seq = 0usize;
    while cur.pos < body.len() {
        let start = cur.offset();
        tick += cur.vlq(start)? as u64;
        let first = cur.byte(start)?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            let status = running.ok_or(SmfError::InvalidEvent {
                offset: start,
                reason: "data byte without running status",
            })?;
            (status, Some(first))
        };
        match status {
            0xff => {
                running = None;
                let kind = cur.byte(start)?;
                let len = cur.vlq(start)? as usize;
                let data = cur.take(len, start)?;
                match kind {
                    0x2f => return Ok(tick),
                    0x51 if len == 3 => {
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us == 0 {
                            return Err(SmfError::InvalidEvent {
                                offset: start,
                                reason: "zero tempo",
                            });
                        }
                        tempos.push((tick, us));
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur.vlq(start)? as usize;
                cur.take(len, start)?;
            }
            0xf1..=0xfe => {
                return Err(SmfError::InvalidEvent {
                    offset: start,
                    reason: "system message inside a track",
                });
            }
            _ => {
                running = Some(status);
                let n_data = match status & 0xf0 {
                    0xc0 | 0xd0 => 1,
                    _ => 2,
                };
                let mut data = [0u8; 2];
                for (i, slot) in data.iter_mut().take(n_data).enumerate() {
                    let b = match (i, first_data) {
                        (0, Some(b)) => b,
                        _ => cur.byte(start)?,
                    };
                    if b & 0x80 != 0 {
                        return Err(SmfError::InvalidEvent {
                            offset: start,
                            reason: "status byte where data byte expected",
                        });
                    }
                    *slot = b;
                }
                let channel = status & 0x0f;
                let kind = match status & 0xf0 {
                    0x90 => Some(RawKind::On),
                    0x80 => Some(RawKind::Off),
                    _ => None,
                };
                if let Some(kind) = kind {
                    notes.push((tick, track, seq, kind, data[0], data[1], channel));
                    seq += 1;
                }
            }
        }
    }
    Ok(tick)
}

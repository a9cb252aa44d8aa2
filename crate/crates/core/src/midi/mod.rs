//! MIDI ingestion: Standard MIDI Files, live channel messages, note pairing
//! and voice classification.

mod guitar;
mod live;
mod pairing;
mod smf;
mod voice;
mod write;

use std::cmp::Ordering;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use guitar::{derive_string_fret, FretError, Tuning, STANDARD_TUNING};
pub use live::{decode_live, raw_notes_to_live, LiveDecodeError, LiveMessage};
pub use pairing::{pair_note_events, NotePairer, PairOutcome, RawKind, RawNote};
pub use smf::{
    parse_smf, parse_smf_with, read_smf_raw, Division, ParsedSmf, SmfError, SmfHeader, TempoMap,
};
pub use voice::{classify_drum, DrumMap, VoiceMap};
pub use write::{write_smf, SmfFormat, WriteOptions};

/// A single paired note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NoteEvent {
    /// Onset in seconds from the start of the performance.
    pub onset: f64,
    /// Release in seconds; `None` while the note is still held.
    pub release: Option<f64>,
    pub pitch: u8,
    pub velocity: u8,
    pub channel: u8,
    pub voice: VoiceTag,
}

impl NoteEvent {
    /// Held duration in seconds, if released.
    pub fn duration(&self) -> Option<f64> {
        self.release.map(|r| r - self.onset)
    }

    pub fn is_open(&self) -> bool {
        self.release.is_none()
    }

    pub(crate) fn sort_cmp(&self, other: &NoteEvent) -> Ordering {
        self.onset
            .total_cmp(&other.onset)
            .then(self.pitch.cmp(&other.pitch))
            .then(self.channel.cmp(&other.channel))
    }
}

/// The instrument voice a note was played with.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum VoiceTag {
    Keyboard,
    Drum(DrumVoice),
    /// Guitar string 1 (highest) to 6 (lowest).
    GuitarString(u8),
    Other,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum DrumVoice {
    Kick,
    Snare,
    HiHat,
    Tom,
    Cymbal,
    Other,
}

impl DrumVoice {
    pub const ALL: [DrumVoice; 6] = [
        DrumVoice::Kick,
        DrumVoice::Snare,
        DrumVoice::HiHat,
        DrumVoice::Tom,
        DrumVoice::Cymbal,
        DrumVoice::Other,
    ];

    /// A representative General MIDI key for this voice, used when
    /// synthesizing drum parts.
    pub fn representative_pitch(self) -> u8 {
        match self {
            DrumVoice::Kick => 36,
            DrumVoice::Snare => 38,
            DrumVoice::HiHat => 42,
            DrumVoice::Tom => 45,
            DrumVoice::Cymbal => 49,
            DrumVoice::Other => 75,
        }
    }
}

/// An ingest anomaly. Anomalies never abort ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    /// A note-off without a sounding note of the same pitch and channel.
    UnmatchedNoteOff { time: f64, pitch: u8, channel: u8 },
    /// A note released at the same instant it started; kept as onset-only.
    ZeroLengthNote { time: f64, pitch: u8, channel: u8 },
    /// A live message that could not be decoded.
    MalformedMessage { detail: String },
    /// A structural oddity in a MIDI file that did not prevent parsing.
    FileAnomaly { detail: String },
}

/// Time-ordered notes of one performance.
///
/// Events stay sorted by onset, then pitch, then channel after every
/// insertion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStream {
    events: Vec<NoteEvent>,
    pub device: String,
    pub warnings: Vec<IngestWarning>,
}

impl PerformanceStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a stream from events in any order.
    pub fn from_events(events: impl IntoIterator<Item = NoteEvent>) -> Self {
        let mut events: Vec<NoteEvent> = events.into_iter().collect();
        events.sort_by(NoteEvent::sort_cmp);
        PerformanceStream {
            events,
            ..Default::default()
        }
    }

    pub fn events(&self) -> &[NoteEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Inserts an event after any existing events with an equal sort key.
    pub fn push(&mut self, event: NoteEvent) -> usize {
        let at = self
            .events
            .partition_point(|e| e.sort_cmp(&event) != Ordering::Greater);
        self.events.insert(at, event);
        at
    }

    /// Sets the release of the first open note matching the key. Returns the
    /// updated event.
    pub(crate) fn close(
        &mut self,
        onset: f64,
        pitch: u8,
        channel: u8,
        release: Option<f64>,
    ) -> Option<&NoteEvent> {
        let start = self.events.partition_point(|e| {
            e.onset
                .total_cmp(&onset)
                .then(e.pitch.cmp(&pitch))
                .then(e.channel.cmp(&channel))
                == Ordering::Less
        });
        let idx = self.events[start..]
            .iter()
            .take_while(|e| {
                e.onset.total_cmp(&onset) == Ordering::Equal
                    && e.pitch == pitch
                    && e.channel == channel
            })
            .position(|e| e.release.is_none())
            .map(|i| start + i)?;
        self.events[idx].release = release;
        Some(&self.events[idx])
    }

    /// Highest release or onset time in the stream.
    pub fn end_time(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.release.unwrap_or(e.onset))
            .fold(0.0, f64::max)
    }
}

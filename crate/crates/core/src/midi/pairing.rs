use std::collections::{HashMap, VecDeque};

use super::{IngestWarning, NoteEvent, PerformanceStream, VoiceMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawKind {
    On,
    Off,
}

/// An unpaired note message with its time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawNote {
    pub kind: RawKind,
    pub pitch: u8,
    pub velocity: u8,
    pub channel: u8,
    pub time: f64,
}

impl RawNote {
    pub fn on(pitch: u8, velocity: u8, channel: u8, time: f64) -> Self {
        RawNote {
            kind: RawKind::On,
            pitch,
            velocity,
            channel,
            time,
        }
    }

    pub fn off(pitch: u8, channel: u8, time: f64) -> Self {
        RawNote {
            kind: RawKind::Off,
            pitch,
            velocity: 0,
            channel,
            time,
        }
    }

    /// Note-on with velocity 0 is a note-off.
    pub fn is_off(&self) -> bool {
        self.kind == RawKind::Off || self.velocity == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Opened(NoteEvent),
    Closed(NoteEvent),
    Dropped,
}

/// Incremental note pairing. Each note-on is matched with the earliest later
/// note-off of the same pitch and channel.
#[derive(Debug, Clone, Default)]
pub struct NotePairer {
    open: HashMap<(u8, u8), VecDeque<f64>>,
}

impl NotePairer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_count(&self) -> usize {
        self.open.values().map(VecDeque::len).sum()
    }

    pub fn feed(
        &mut self,
        stream: &mut PerformanceStream,
        voices: &VoiceMap,
        raw: RawNote,
    ) -> PairOutcome {
        let pitch = raw.pitch & 0x7f;
        let channel = raw.channel & 0x0f;
        let key = (channel, pitch);
        if !raw.is_off() {
            let event = NoteEvent {
                onset: raw.time,
                release: None,
                pitch,
                velocity: raw.velocity.min(127),
                channel,
                voice: voices.tag(channel, pitch),
            };
            stream.push(event.clone());
            self.open.entry(key).or_default().push_back(raw.time);
            return PairOutcome::Opened(event);
        }

        let queue = self.open.get_mut(&key);
        let onset = match queue.as_ref().and_then(|q| q.front()) {
            Some(&onset) if onset <= raw.time => onset,
            _ => {
                stream.warnings.push(IngestWarning::UnmatchedNoteOff {
                    time: raw.time,
                    pitch,
                    channel,
                });
                return PairOutcome::Dropped;
            }
        };
        if let Some(q) = queue {
            q.pop_front();
            if q.is_empty() {
                self.open.remove(&key);
            }
        }
        if raw.time > onset {
            match stream.close(onset, pitch, channel, Some(raw.time)) {
                Some(e) => PairOutcome::Closed(e.clone()),
                None => PairOutcome::Dropped,
            }
        } else {
            stream.warnings.push(IngestWarning::ZeroLengthNote {
                time: raw.time,
                pitch,
                channel,
            });
            PairOutcome::Dropped
        }
    }
}

/// Pairs a time-sorted list of note messages into a stream. Anomalies are
/// recorded as warnings.
pub fn pair_note_events(raw: &[RawNote], voices: &VoiceMap) -> PerformanceStream {
    let mut stream = PerformanceStream::new();
    let mut pairer = NotePairer::new();
    for &r in raw {
        pairer.feed(&mut stream, voices, r);
    }
    stream
}

//! Practice analytics over MIDI performances.
//!
//! The engine ingests Standard MIDI Files or live MIDI messages, aligns the
//! notes with a metronome grid that the drill declares up front, and computes
//! feedback for five kinds of drills:
//!
//! * held note durations against a vocabulary of correct values ([`duration`]),
//! * onset timing consistency folded over repetitions ([`timing`]),
//! * inter-onset rhythm quantization and accents ([`rhythm`]),
//! * improvisation over a chord progression ([`harmony`]),
//! * guitar fretboard movement ([`fretboard`]).
//!
//! [`session`] ties these together into versioned reports and live frames, and
//! [`server`] streams those frames over a local socket. [`synth`] generates
//! imperfect performances for tests and demos.

pub mod config;
pub mod duration;
pub mod fretboard;
pub mod grid;
pub mod harmony;
pub mod midi;
pub mod report;
pub mod rhythm;
pub mod server;
pub mod session;
pub mod synth;
pub mod timing;

pub use config::{DrillConfig, DrillKind};
pub use grid::GridConfig;
pub use midi::{NoteEvent, PerformanceStream, VoiceTag};
pub use report::Report;

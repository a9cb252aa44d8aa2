//! Held-duration verdicts and the pie/bar fill geometry.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rhythm::{DurationSymbol, NoteBase};

pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// One pie revolution (or one full bar) is a whole note.
pub const BEATS_PER_REVOLUTION: f64 = 4.0;

/// Quarter, half, dotted half and whole.
pub fn default_vocabulary() -> Vec<DurationSymbol> {
    vec![
        DurationSymbol::simple(NoteBase::Quarter),
        DurationSymbol::simple(NoteBase::Half),
        DurationSymbol::dotted(NoteBase::Half, 1),
        DurationSymbol::simple(NoteBase::Whole),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    TooShort,
    TooLong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DurationVerdict {
    pub held_beats: f64,
    pub nearest: DurationSymbol,
    /// `(held - nearest) / nearest`.
    pub deviation_fraction: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DurationError {
    #[error("the duration vocabulary is empty")]
    EmptyVocabulary,
    #[error("held duration {0} is not a positive finite number of beats")]
    InvalidHeld(String),
}

/// Judges a held duration against the closest correct duration. The target
/// is unknown, so the closest vocabulary entry is assumed; on a tie the
/// shorter one wins.
pub fn classify_duration(
    held_beats: f64,
    vocabulary: &[DurationSymbol],
    threshold: f64,
) -> Result<DurationVerdict, DurationError> {
    if !(held_beats.is_finite() && held_beats > 0.0) {
        return Err(DurationError::InvalidHeld(held_beats.to_string()));
    }
    let mut best: Option<(&DurationSymbol, f64)> = None;
    for sym in vocabulary {
        let v = sym.beats();
        let d = (held_beats - v).abs();
        best = match best {
            Some((b, bv)) => {
                let bd = (held_beats - bv).abs();
                if d < bd || (d == bd && v < bv) {
                    Some((sym, v))
                } else {
                    Some((b, bv))
                }
            }
            None => Some((sym, v)),
        };
    }
    let (nearest, value) = best.ok_or(DurationError::EmptyVocabulary)?;
    let deviation_fraction = (held_beats - value) / value;
    let verdict = if deviation_fraction.abs() <= threshold {
        Verdict::Good
    } else if deviation_fraction < -threshold {
        Verdict::TooShort
    } else {
        Verdict::TooLong
    };
    Ok(DurationVerdict {
        held_beats,
        nearest: nearest.clone(),
        deviation_fraction,
        verdict,
    })
}

/// Fill levels for the duration pie (or the "glass" bar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PieGeometry {
    /// Fill fraction per revolution; every layer but the last is full.
    pub layers: Vec<f64>,
    /// Tick marks per revolution (eighth notes).
    pub ticks_per_revolution: u32,
}

pub fn pie_geometry(held_beats: f64) -> PieGeometry {
    let mut layers = Vec::new();
    if held_beats.is_finite() && held_beats > 0.0 {
        let mut k = 0.0;
        while held_beats - BEATS_PER_REVOLUTION * k > 0.0 {
            let fill = (held_beats - BEATS_PER_REVOLUTION * k).clamp(0.0, BEATS_PER_REVOLUTION);
            layers.push(fill / BEATS_PER_REVOLUTION);
            k += 1.0;
        }
    }
    PieGeometry {
        layers,
        ticks_per_revolution: 8,
    }
}

/// A released note with its verdict and fill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DurationEntry {
    pub onset_beats: f64,
    pub pitch: u8,
    pub verdict: DurationVerdict,
    pub pie: PieGeometry,
}

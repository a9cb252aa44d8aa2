//! Musical duration symbols, the vocabulary of representable durations, and
//! quantization of inter-onset intervals with accent detection.
//!
//! Symbols have a compact text form:
//!
//! ```text
//! symbol := simple ( "+" simple )?
//! simple := base ( "." | ".." )? ( "3" )?
//! base   := "whole" | "half" | "quarter" | "eighth" | "sixteenth" | "thirty-second"
//! ```
//!
//! so `quarter.` is a dotted quarter, `eighth3` a triplet eighth and
//! `quarter+sixteenth` a quarter tied to a sixteenth. One beat is a quarter.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum NoteBase {
    ThirtySecond,
    Sixteenth,
    Eighth,
    Quarter,
    Half,
    Whole,
}

impl NoteBase {
    pub const ALL: [NoteBase; 6] = [
        NoteBase::ThirtySecond,
        NoteBase::Sixteenth,
        NoteBase::Eighth,
        NoteBase::Quarter,
        NoteBase::Half,
        NoteBase::Whole,
    ];

    pub fn beats(self) -> f64 {
        match self {
            NoteBase::ThirtySecond => 0.125,
            NoteBase::Sixteenth => 0.25,
            NoteBase::Eighth => 0.5,
            NoteBase::Quarter => 1.0,
            NoteBase::Half => 2.0,
            NoteBase::Whole => 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoteBase::ThirtySecond => "thirty-second",
            NoteBase::Sixteenth => "sixteenth",
            NoteBase::Eighth => "eighth",
            NoteBase::Quarter => "quarter",
            NoteBase::Half => "half",
            NoteBase::Whole => "whole",
        }
    }
}

/// A note value: base, dots, optional triplet, and at most one tie.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DurationSymbol {
    pub base: NoteBase,
    pub dots: u8,
    pub triplet: bool,
    pub tie: Option<Box<DurationSymbol>>,
}

impl DurationSymbol {
    pub const fn simple(base: NoteBase) -> Self {
        DurationSymbol {
            base,
            dots: 0,
            triplet: false,
            tie: None,
        }
    }

    pub fn dotted(base: NoteBase, dots: u8) -> Self {
        DurationSymbol {
            dots,
            ..Self::simple(base)
        }
    }

    pub fn triplet(base: NoteBase) -> Self {
        DurationSymbol {
            triplet: true,
            ..Self::simple(base)
        }
    }

    /// Ties `other` onto this symbol. Ties of ties are flattened away: only
    /// the untied head of `other` is kept.
    pub fn tied(mut self, other: DurationSymbol) -> Self {
        let head = DurationSymbol { tie: None, ..other };
        self.tie = Some(Box::new(head));
        self
    }

    /// Length in beats (quarter = 1).
    pub fn beats(&self) -> f64 {
        let dot = match self.dots {
            0 => 1.0,
            1 => 1.5,
            _ => 1.75,
        };
        let mut v = self.base.beats() * dot;
        if self.triplet {
            v = v * 2.0 / 3.0;
        }
        v + self.tie.as_ref().map_or(0.0, |t| t.beats())
    }

    /// Notation cost used to pick among symbols of equal length: no tie,
    /// then fewer dots, then no tuplet.
    fn complexity(&self) -> (u8, u8, u8) {
        let tie = self.tie.as_deref();
        (
            tie.is_some() as u8,
            self.dots + tie.map_or(0, |t| t.dots),
            self.triplet as u8 + tie.map_or(0, |t| t.triplet as u8),
        )
    }
}

impl fmt::Display for DurationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.name())?;
        for _ in 0..self.dots.min(2) {
            f.write_str(".")?;
        }
        if self.triplet {
            f.write_str("3")?;
        }
        if let Some(t) = &self.tie {
            write!(f, "+{t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid duration symbol {0:?}")]
pub struct SymbolParseError(pub String);

fn parse_simple(s: &str) -> Option<DurationSymbol> {
    let (s, triplet) = match s.strip_suffix('3') {
        Some(rest) => (rest, true),
        None => (s, false),
    };
    let trimmed = s.trim_end_matches('.');
    let dots = s.len() - trimmed.len();
    if dots > 2 {
        return None;
    }
    let base = NoteBase::ALL.into_iter().find(|b| b.name() == trimmed)?;
    Some(DurationSymbol {
        base,
        dots: dots as u8,
        triplet,
        tie: None,
    })
}

impl FromStr for DurationSymbol {
    type Err = SymbolParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SymbolParseError(s.to_string());
        let mut parts = s.trim().split('+');
        let head = parse_simple(parts.next().ok_or_else(err)?).ok_or_else(err)?;
        let tail = match parts.next() {
            Some(t) => Some(parse_simple(t).ok_or_else(err)?),
            None => None,
        };
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(match tail {
            Some(t) => head.tied(t),
            None => head,
        })
    }
}

impl Serialize for DurationSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DurationSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for DurationSymbol {
    fn schema_name() -> String {
        "DurationSymbol".to_string()
    }

    fn json_schema(_: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        let base = "(whole|half|quarter|eighth|sixteenth|thirty-second)(\\.{1,2})?3?";
        schemars::schema::SchemaObject {
            instance_type: Some(schemars::schema::InstanceType::String.into()),
            string: Some(Box::new(schemars::schema::StringValidation {
                pattern: Some(format!("^{base}(\\+{base})?$")),
                ..Default::default()
            })),
            ..Default::default()
        }
        .into()
    }
}

/// Which symbols the quantizer may use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct VocabularyConfig {
    pub bases: Vec<NoteBase>,
    pub max_dots: u8,
    pub allow_triplets: bool,
    /// Longest base that may take a triplet.
    pub max_triplet_base: NoteBase,
    pub allow_ties: bool,
}

impl Default for VocabularyConfig {
    /// Sixteenth to whole, single dots, triplets up to the quarter, no ties.
    fn default() -> Self {
        VocabularyConfig {
            bases: vec![
                NoteBase::Sixteenth,
                NoteBase::Eighth,
                NoteBase::Quarter,
                NoteBase::Half,
                NoteBase::Whole,
            ],
            max_dots: 1,
            allow_triplets: true,
            max_triplet_base: NoteBase::Quarter,
            allow_ties: false,
        }
    }
}

/// A symbol with its length in beats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Representable {
    pub symbol: DurationSymbol,
    pub beats: f64,
}

const SAME_LENGTH: f64 = 1e-9;

fn dedup_sorted(mut all: Vec<Representable>) -> Vec<Representable> {
    all.sort_by(|a, b| {
        a.beats
            .total_cmp(&b.beats)
            .then_with(|| a.symbol.complexity().cmp(&b.symbol.complexity()))
    });
    let mut out: Vec<Representable> = Vec::with_capacity(all.len());
    for r in all {
        match out.last() {
            Some(last) if (r.beats - last.beats).abs() <= SAME_LENGTH => {}
            _ => out.push(r),
        }
    }
    out
}

/// Enumerates the distinct durations a vocabulary can notate, sorted by
/// length. Equal lengths keep the simplest notation.
pub fn representable_set(config: &VocabularyConfig) -> Vec<Representable> {
    let mut simple = Vec::new();
    for &base in &config.bases {
        for dots in 0..=config.max_dots.min(2) {
            simple.push(DurationSymbol::dotted(base, dots));
        }
        if config.allow_triplets && base <= config.max_triplet_base {
            simple.push(DurationSymbol::triplet(base));
        }
    }
    let mut all: Vec<Representable> = simple
        .iter()
        .map(|s| Representable {
            beats: s.beats(),
            symbol: s.clone(),
        })
        .collect();
    if config.allow_ties {
        for a in &simple {
            for b in &simple {
                if a.beats() >= b.beats() {
                    let symbol = a.clone().tied(b.clone());
                    all.push(Representable {
                        beats: symbol.beats(),
                        symbol,
                    });
                }
            }
        }
    }
    dedup_sorted(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RhythmError {
    #[error("the representable set is empty")]
    EmptySet,
    #[error("at least two durations are needed to partition the axis")]
    TooFewForRanges,
    #[error("no notes given")]
    EmptyInput,
    #[error("interval {0} is not a positive finite number of beats")]
    InvalidInterval(String),
}

/// An interval snapped to a symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Quantized {
    pub symbol: DurationSymbol,
    pub ioi_beats: f64,
    /// `ioi_beats - beats(symbol)`.
    pub error_beats: f64,
}

/// Snaps an inter-onset interval to the nearest representable duration.
/// Exact midpoints go to the shorter duration.
pub fn quantize_ioi(ioi_beats: f64, set: &[Representable]) -> Result<Quantized, RhythmError> {
    if set.is_empty() {
        return Err(RhythmError::EmptySet);
    }
    if !(ioi_beats.is_finite() && ioi_beats > 0.0) {
        return Err(RhythmError::InvalidInterval(ioi_beats.to_string()));
    }
    let upper = set.partition_point(|r| r.beats < ioi_beats);
    let pick = match (upper.checked_sub(1).map(|i| &set[i]), set.get(upper)) {
        (Some(lo), Some(hi)) => {
            if ioi_beats > (lo.beats + hi.beats) / 2.0 {
                hi
            } else {
                lo
            }
        }
        (Some(lo), None) => lo,
        (None, Some(hi)) => hi,
        (None, None) => unreachable!("set is non-empty"),
    };
    Ok(Quantized {
        symbol: pick.symbol.clone(),
        ioi_beats,
        error_beats: ioi_beats - pick.beats,
    })
}

/// The interval of lengths that quantize to one symbol: `(lo, hi]`, with
/// `hi == None` for the unbounded last range. The first range starts at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QuantRange {
    pub symbol: DurationSymbol,
    pub beats: f64,
    pub lo: f64,
    pub hi: Option<f64>,
}

impl QuantRange {
    pub fn width(&self) -> f64 {
        self.hi.map_or(f64::INFINITY, |hi| hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && self.hi.is_none_or(|hi| x <= hi)
    }
}

/// Partitions `(0, ∞)` at the midpoints between neighboring durations.
pub fn quantization_ranges(set: &[Representable]) -> Result<Vec<QuantRange>, RhythmError> {
    if set.len() < 2 {
        return Err(RhythmError::TooFewForRanges);
    }
    let mids: Vec<f64> = set
        .windows(2)
        .map(|w| (w[0].beats + w[1].beats) / 2.0)
        .collect();
    Ok(set
        .iter()
        .enumerate()
        .map(|(i, r)| QuantRange {
            symbol: r.symbol.clone(),
            beats: r.beats,
            lo: if i == 0 { 0.0 } else { mids[i - 1] },
            hi: mids.get(i).copied(),
        })
        .collect())
}

/// How accents are told apart from other notes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AccentMode {
    /// Velocity at or above a fixed value.
    Threshold { velocity: u8 },
    /// Velocity at or above a fraction of the loudest note.
    Relative { fraction: f64 },
}

impl Default for AccentMode {
    fn default() -> Self {
        AccentMode::Relative { fraction: 0.8 }
    }
}

/// Flags accented notes. In relative mode a performance without dynamic
/// contrast flags every note.
pub fn detect_accents(velocities: &[u8], mode: AccentMode) -> Result<Vec<bool>, RhythmError> {
    let max = *velocities.iter().max().ok_or(RhythmError::EmptyInput)?;
    Ok(match mode {
        AccentMode::Threshold { velocity } => velocities.iter().map(|&v| v >= velocity).collect(),
        AccentMode::Relative { fraction } => velocities
            .iter()
            .map(|&v| max > 0 && v as f64 / max as f64 >= fraction)
            .collect(),
    })
}

/// Indices where the accent flags disagree with "every `period`-th note,
/// starting at `offset`, is accented". Alternating patterns are checked one
/// segment at a time.
pub fn check_accent_pattern(flags: &[bool], period: NonZeroUsize, offset: usize) -> Vec<usize> {
    let period = period.get();
    let offset = offset % period;
    flags
        .iter()
        .enumerate()
        .filter(|&(i, &f)| f != (i % period == offset))
        .map(|(i, _)| i)
        .collect()
}

/// A quantized interval with the loudness of the note that starts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QuantizedNote {
    pub onset_beats: f64,
    pub symbol: DurationSymbol,
    pub ioi_beats: f64,
    pub error_beats: f64,
    pub velocity: u8,
    pub accent: bool,
}

/// Quantizes the intervals between successive onsets. Onsets closer than
/// `chord_window` beats are treated as one (the loudest note counts).
pub fn quantize_onsets(
    onsets: &[(f64, u8)],
    set: &[Representable],
    mode: AccentMode,
    chord_window: f64,
) -> Result<(Vec<QuantizedNote>, Vec<bool>), RhythmError> {
    let mut sorted: Vec<(f64, u8)> = onsets.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, u8)> = Vec::with_capacity(sorted.len());
    for (t, v) in sorted {
        match merged.last_mut() {
            Some(last) if t - last.0 < chord_window => last.1 = last.1.max(v),
            _ => merged.push((t, v)),
        }
    }
    if merged.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let velocities: Vec<u8> = merged.iter().map(|m| m.1).collect();
    let accents = detect_accents(&velocities, mode)?;
    let mut notes = Vec::with_capacity(merged.len().saturating_sub(1));
    for (i, w) in merged.windows(2).enumerate() {
        let q = quantize_ioi(w[1].0 - w[0].0, set)?;
        notes.push(QuantizedNote {
            onset_beats: w[0].0,
            symbol: q.symbol,
            ioi_beats: q.ioi_beats,
            error_beats: q.error_beats,
            velocity: w[0].1,
            accent: accents[i],
        });
    }
    Ok((notes, accents))
}

//! Chord/scale fit of improvised notes over a progression, binned per bar and
//! repetition.

use std::collections::BTreeMap;
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridConfig;
use crate::midi::PerformanceStream;

/// Pitch without octave, 0 = C.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(transparent)]
pub struct PitchClass(u8);

impl PitchClass {
    pub fn new(value: i32) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn of_pitch(pitch: u8) -> Self {
        PitchClass(pitch % 12)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        PitchClass::new(self.0 as i32 + semitones)
    }

    pub fn parse(name: &str) -> Option<Self> {
        let mut chars = name.chars();
        let base = match chars.next()?.to_ascii_uppercase() {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return None,
        };
        let mut shift = 0;
        for c in chars {
            shift += match c {
                '#' | '♯' => 1,
                'b' | '♭' => -1,
                _ => return None,
            };
        }
        Some(PitchClass::new(base + shift))
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 12] = [
            "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
        ];
        f.write_str(NAMES[self.0 as usize])
    }
}

/// Set of 12 pitch classes as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct PcSet(u16);

impl PcSet {
    fn from_intervals(root: PitchClass, intervals: &[u8]) -> Self {
        PcSet(
            intervals
                .iter()
                .fold(0, |acc, &i| acc | 1 << root.transpose(i as i32).0),
        )
    }

    fn contains(self, pc: PitchClass) -> bool {
        self.0 & (1 << pc.0) != 0
    }

    fn is_subset(self, other: PcSet) -> bool {
        self.0 & !other.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarmonyError {
    #[error("scale intervals must be strictly increasing within 0..12 and start at 0")]
    BadIntervals,
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("cannot read chord {0:?}")]
    BadChord(String),
    #[error("the progression has no bars")]
    EmptyProgression,
    #[error("{bars} bars but {scales} per-bar scales")]
    BarScaleMismatch { bars: usize, scales: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Scale {
    pub root: PitchClass,
    pub intervals: Vec<u8>,
}

pub const MODES: &[(&str, &[u8])] = &[
    ("major", &[0, 2, 4, 5, 7, 9, 11]),
    ("minor", &[0, 2, 3, 5, 7, 8, 10]),
    ("harmonic-minor", &[0, 2, 3, 5, 7, 8, 11]),
    ("dorian", &[0, 2, 3, 5, 7, 9, 10]),
    ("mixolydian", &[0, 2, 4, 5, 7, 9, 10]),
    ("major-pentatonic", &[0, 2, 4, 7, 9]),
    ("minor-pentatonic", &[0, 3, 5, 7, 10]),
    ("blues", &[0, 3, 5, 6, 7, 10]),
];

impl Scale {
    pub fn new(root: PitchClass, intervals: Vec<u8>) -> Result<Self, HarmonyError> {
        let increasing = intervals.windows(2).all(|w| w[0] < w[1]);
        if intervals.first() != Some(&0) || !increasing || intervals.iter().any(|&i| i > 11) {
            return Err(HarmonyError::BadIntervals);
        }
        Ok(Scale { root, intervals })
    }

    pub fn from_mode(root: PitchClass, mode: &str) -> Result<Self, HarmonyError> {
        let (_, iv) = MODES
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(mode.trim()))
            .ok_or_else(|| HarmonyError::UnknownMode(mode.to_string()))?;
        Scale::new(root, iv.to_vec())
    }

    fn set(&self) -> PcSet {
        PcSet::from_intervals(self.root, &self.intervals)
    }

    pub fn pitch_classes(&self) -> Vec<PitchClass> {
        self.intervals
            .iter()
            .map(|&i| self.root.transpose(i as i32))
            .collect()
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.set().contains(pc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ChordQuality {
    Major,
    Minor,
    Dominant7,
    Major7,
    Minor7,
    Diminished,
    Custom { name: String, intervals: Vec<u8> },
}

impl ChordQuality {
    pub const BUILTIN: [ChordQuality; 6] = [
        ChordQuality::Major,
        ChordQuality::Minor,
        ChordQuality::Dominant7,
        ChordQuality::Major7,
        ChordQuality::Minor7,
        ChordQuality::Diminished,
    ];

    pub fn template(&self) -> &[u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Custom { intervals, .. } => intervals,
        }
    }

    fn suffixes(&self) -> &'static [&'static str] {
        match self {
            ChordQuality::Major => &["", "maj", "M"],
            ChordQuality::Minor => &["m", "min", "-"],
            ChordQuality::Dominant7 => &["7"],
            ChordQuality::Major7 => &["maj7", "M7", "Δ7"],
            ChordQuality::Minor7 => &["m7", "min7", "-7"],
            ChordQuality::Diminished => &["dim", "°", "o"],
            ChordQuality::Custom { .. } => &[],
        }
    }

    fn suffix(&self) -> &str {
        match self {
            ChordQuality::Custom { name, .. } => name,
            q => q.suffixes()[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Chord {
    pub root: PitchClass,
    pub quality: ChordQuality,
}

impl Chord {
    pub fn new(root: PitchClass, quality: ChordQuality) -> Self {
        Chord { root, quality }
    }

    fn set(&self) -> PcSet {
        PcSet::from_intervals(self.root, self.quality.template())
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.set().contains(pc)
    }

    /// Parses symbols like `C`, `Am`, `G7`, `Fmaj7`, `Bbm7`, `B°`. Custom
    /// qualities are matched by suffix after the built-in ones.
    pub fn parse(token: &str, custom: &[ChordQuality]) -> Result<Self, HarmonyError> {
        let bad = || HarmonyError::BadChord(token.to_string());
        let mut split = 1;
        for c in token.chars().skip(1) {
            if matches!(c, '#' | 'b' | '♯' | '♭') {
                split += c.len_utf8();
            } else {
                break;
            }
        }
        if token.is_empty() || !token.is_char_boundary(split.min(token.len())) {
            return Err(bad());
        }
        let split = split.min(token.len());
        let root = PitchClass::parse(&token[..split]).ok_or_else(bad)?;
        let suffix = &token[split..];
        let quality = ChordQuality::BUILTIN
            .iter()
            .find(|q| q.suffixes().contains(&suffix))
            .or_else(|| custom.iter().find(|q| q.suffix() == suffix))
            .cloned()
            .ok_or_else(bad)?;
        Ok(Chord { root, quality })
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.root, self.quality.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChordProgression {
    pub scale: Scale,
    /// Optional scale per bar; when present it has one entry per bar.
    pub bar_scales: Option<Vec<Scale>>,
    pub bars: Vec<Chord>,
}

impl ChordProgression {
    pub fn new(scale: Scale, bars: Vec<Chord>) -> Result<Self, HarmonyError> {
        if bars.is_empty() {
            return Err(HarmonyError::EmptyProgression);
        }
        Ok(ChordProgression {
            scale,
            bar_scales: None,
            bars,
        })
    }

    pub fn with_bar_scales(mut self, scales: Vec<Scale>) -> Result<Self, HarmonyError> {
        if scales.len() != self.bars.len() {
            return Err(HarmonyError::BarScaleMismatch {
                bars: self.bars.len(),
                scales: scales.len(),
            });
        }
        self.bar_scales = Some(scales);
        Ok(self)
    }

    /// Parses a key, a mode and whitespace-separated chords, one per bar,
    /// e.g. `("C", "major", "C Am F G")`.
    pub fn parse(
        key: &str,
        mode: &str,
        chords: &str,
        custom: &[ChordQuality],
    ) -> Result<Self, HarmonyError> {
        let root = PitchClass::parse(key.trim()).ok_or_else(|| HarmonyError::UnknownKey(key.into()))?;
        let scale = Scale::from_mode(root, mode)?;
        let bars = chords
            .split(|c: char| c.is_whitespace() || c == '|')
            .filter(|t| !t.is_empty())
            .map(|t| Chord::parse(t, custom))
            .collect::<Result<Vec<_>, _>>()?;
        ChordProgression::new(scale, bars)
    }

    pub fn scale_for(&self, bar: usize) -> &Scale {
        self.bar_scales
            .as_ref()
            .and_then(|s| s.get(bar))
            .unwrap_or(&self.scale)
    }
}

/// Green / orange / gray in the chord-progression view.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum NoteFit {
    ChordTone,
    ScaleTone,
    Outside,
}

/// Chord tones take precedence over scale tones.
pub fn classify_note(pc: PitchClass, chord: &Chord, scale: &Scale) -> NoteFit {
    if chord.contains(pc) {
        NoteFit::ChordTone
    } else if scale.contains(pc) {
        NoteFit::ScaleTone
    } else {
        NoteFit::Outside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BarLocation {
    pub repetition: u64,
    pub bar_index: usize,
    pub chord: Chord,
}

pub fn locate_bar(onset_beats: f64, grid: &GridConfig, progression: &ChordProgression) -> BarLocation {
    let bars_elapsed = (onset_beats.max(0.0) / grid.beats_per_bar as f64).floor() as u64;
    let n = progression.bars.len() as u64;
    let bar_index = (bars_elapsed % n) as usize;
    BarLocation {
        repetition: bars_elapsed / n,
        bar_index,
        chord: progression.bars[bar_index].clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WaffleCell {
    pub repetition: u64,
    pub bar: usize,
    pub pitch_class: PitchClass,
    pub fit: NoteFit,
    pub count: usize,
}

/// Note counts per (repetition, bar) facet, by pitch class and fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Waffle {
    pub bars: usize,
    pub repetitions: u64,
    pub cells: Vec<WaffleCell>,
}

impl Waffle {
    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn count_fit(&self, fit: NoteFit) -> usize {
        self.cells
            .iter()
            .filter(|c| c.fit == fit)
            .map(|c| c.count)
            .sum()
    }
}

pub fn bin_notes(stream: &PerformanceStream, grid: &GridConfig, progression: &ChordProgression) -> Waffle {
    let mut counts: BTreeMap<(u64, usize, PitchClass, NoteFit), usize> = BTreeMap::new();
    for e in stream.events() {
        let loc = locate_bar(grid.seconds_to_beats(e.onset), grid, progression);
        let pc = PitchClass::of_pitch(e.pitch);
        let fit = classify_note(pc, &loc.chord, progression.scale_for(loc.bar_index));
        *counts.entry((loc.repetition, loc.bar_index, pc, fit)).or_default() += 1;
    }
    let repetitions = counts.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    Waffle {
        bars: progression.bars.len(),
        repetitions,
        cells: counts
            .into_iter()
            .map(|((repetition, bar, pitch_class, fit), count)| WaffleCell {
                repetition,
                bar,
                pitch_class,
                fit,
                count,
            })
            .collect(),
    }
}

/// Coarse duration classes for the second color scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DurationCategory {
    Sixteenth,
    Eighth,
    Quarter,
    Half,
    Whole,
}

/// Nearest of sixteenth..whole by midpoint partition; midpoints go to the
/// shorter class. Returns `None` for non-positive values.
pub fn duration_category(beats: f64) -> Option<DurationCategory> {
    if beats.is_nan() || beats <= 0.0 {
        return None;
    }
    Some(if beats <= 0.375 {
        DurationCategory::Sixteenth
    } else if beats <= 0.75 {
        DurationCategory::Eighth
    } else if beats <= 1.5 {
        DurationCategory::Quarter
    } else if beats <= 3.0 {
        DurationCategory::Half
    } else {
        DurationCategory::Whole
    })
}

/// One played note in the progression view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HarmonyNote {
    pub onset_beats: f64,
    pub pitch: u8,
    pub pitch_class: PitchClass,
    pub repetition: u64,
    pub bar: usize,
    pub fit: NoteFit,
    /// From the held duration; `None` while the note is held.
    pub duration: Option<DurationCategory>,
}

pub fn annotate_notes(
    stream: &PerformanceStream,
    grid: &GridConfig,
    progression: &ChordProgression,
) -> Vec<HarmonyNote> {
    stream
        .events()
        .iter()
        .map(|e| {
            let onset_beats = grid.seconds_to_beats(e.onset);
            let loc = locate_bar(onset_beats, grid, progression);
            let pc = PitchClass::of_pitch(e.pitch);
            HarmonyNote {
                onset_beats,
                pitch: e.pitch,
                pitch_class: pc,
                repetition: loc.repetition,
                bar: loc.bar_index,
                fit: classify_note(pc, &loc.chord, progression.scale_for(loc.bar_index)),
                duration: e
                    .duration()
                    .and_then(|d| duration_category(grid.seconds_to_beats(d))),
            }
        })
        .collect()
}

/// Whether every chord only uses tones of its bar's scale.
pub fn is_diatonic(progression: &ChordProgression) -> bool {
    progression
        .bars
        .iter()
        .enumerate()
        .all(|(i, c)| c.set().is_subset(progression.scale_for(i).set()))
}

//! The drill configuration document: which drill is practiced and everything
//! the engine knows about it. Loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duration::{default_vocabulary, DEFAULT_THRESHOLD};
use crate::fretboard::MovementThresholds;
use crate::grid::GridConfig;
use crate::harmony::{ChordProgression, ChordQuality, PitchClass, Scale};
use crate::midi::{DrumMap, DrumVoice, Tuning, VoiceMap};
use crate::rhythm::{AccentMode, DurationSymbol, VocabularyConfig};
use crate::synth::{ErrorModel, PatternSpec, Slot};
use crate::timing::TimingParams;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "kebab-case")]
pub enum DrillKind {
    Duration,
    Timing,
    Accents,
    ChordProgression,
    Fretboard,
}

impl DrillKind {
    pub const ALL: [DrillKind; 5] = [
        DrillKind::Duration,
        DrillKind::Timing,
        DrillKind::Accents,
        DrillKind::ChordProgression,
        DrillKind::Fretboard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DrillKind::Duration => "duration",
            DrillKind::Timing => "timing",
            DrillKind::Accents => "accents",
            DrillKind::ChordProgression => "chord-progression",
            DrillKind::Fretboard => "fretboard",
        }
    }
}

impl std::str::FromStr for DrillKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DrillKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown drill kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct DurationParams {
    pub vocabulary: Vec<DurationSymbol>,
    /// Relative deviation still judged good.
    pub threshold: f64,
}

impl Default for DurationParams {
    fn default() -> Self {
        DurationParams {
            vocabulary: default_vocabulary(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AccentPatternSpec {
    pub period: usize,
    #[serde(default)]
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct RhythmParams {
    pub vocabulary: VocabularyConfig,
    pub accent_mode: AccentMode,
    /// Expected accents, if the drill prescribes them.
    pub accent_pattern: Option<AccentPatternSpec>,
    /// Onsets closer than this many beats count as one chord.
    pub chord_window_beats: f64,
}

impl Default for RhythmParams {
    fn default() -> Self {
        RhythmParams {
            vocabulary: VocabularyConfig::default(),
            accent_mode: AccentMode::default(),
            accent_pattern: None,
            chord_window_beats: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScaleSpec {
    pub root: String,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CustomQuality {
    /// Chord suffix, e.g. `sus4`.
    pub name: String,
    /// Semitones above the root.
    pub intervals: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProgressionConfig {
    pub key: String,
    #[serde(default = "default_mode")]
    pub mode: String,
    /// One chord per bar, e.g. `"C Am F G"`.
    pub chords: String,
    /// One scale per bar; the key's scale applies when absent.
    #[serde(default)]
    pub bar_scales: Option<Vec<ScaleSpec>>,
    #[serde(default)]
    pub custom_qualities: Vec<CustomQuality>,
}

fn default_mode() -> String {
    "major".into()
}

impl ProgressionConfig {
    pub fn build(&self) -> Result<ChordProgression, crate::harmony::HarmonyError> {
        let custom: Vec<ChordQuality> = self
            .custom_qualities
            .iter()
            .map(|q| ChordQuality::Custom {
                name: q.name.clone(),
                intervals: q.intervals.clone(),
            })
            .collect();
        let p = ChordProgression::parse(&self.key, &self.mode, &self.chords, &custom)?;
        match &self.bar_scales {
            None => Ok(p),
            Some(specs) => {
                let scales = specs
                    .iter()
                    .map(|s| {
                        let root = PitchClass::parse(&s.root)
                            .ok_or_else(|| crate::harmony::HarmonyError::UnknownKey(s.root.clone()))?;
                        Scale::from_mode(root, &s.mode)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                p.with_bar_scales(scales)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FretboardParams {
    pub tuning: Tuning,
    pub bars_per_facet: u32,
    pub movement: MovementThresholds,
}

impl Default for FretboardParams {
    fn default() -> Self {
        FretboardParams {
            tuning: Tuning::default(),
            bars_per_facet: 1,
            movement: MovementThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct DrumOverride {
    pub pitch: u8,
    pub voice: DrumVoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct VoiceConfig {
    pub drum_channels: Vec<u8>,
    /// Channel for guitar strings 1 to 6. Fretboard drills default to
    /// channels 0-5.
    pub guitar_channels: Option<[u8; 6]>,
    pub drum_overrides: Vec<DrumOverride>,
}

impl Default for VoiceConfig {
    fn default() -> Self {
        VoiceConfig {
            drum_channels: vec![9],
            guitar_channels: None,
            drum_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputSource {
    File { path: PathBuf },
    Live { port: u16 },
}

/// Pattern and error model for generated performances; the drill's grid is
/// used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SynthSection {
    pub slots: Vec<Slot>,
    pub repetitions: u32,
    #[serde(default)]
    pub model: ErrorModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DrillConfig {
    pub kind: DrillKind,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub duration: DurationParams,
    #[serde(default)]
    pub timing: TimingParams,
    #[serde(default)]
    pub rhythm: RhythmParams,
    #[serde(default)]
    pub progression: Option<ProgressionConfig>,
    #[serde(default)]
    pub fretboard: FretboardParams,
    #[serde(default)]
    pub voices: VoiceConfig,
    #[serde(default)]
    pub input: Option<InputSource>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{format} syntax: {message}")]
    Syntax {
        format: &'static str,
        message: String,
    },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl std::fmt::Display) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.to_string(),
        }
    }

    /// The offending field, for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// JSON Schema of a drill configuration document.
pub fn config_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(DrillConfig)).unwrap_or_default()
}

impl DrillConfig {
    pub fn new(kind: DrillKind) -> Self {
        DrillConfig {
            kind,
            grid: GridConfig::default(),
            duration: DurationParams::default(),
            timing: TimingParams::default(),
            rhythm: RhythmParams::default(),
            progression: None,
            fretboard: FretboardParams::default(),
            voices: VoiceConfig::default(),
            input: None,
            synth: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: DrillConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
            format: "toml",
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: DrillConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            format: "json",
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            DrillConfig::from_json_str(&text)
        } else {
            DrillConfig::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid
            .validate()
            .map_err(|e| ConfigError::invalid(&format!("grid.{}", e.field), e.reason))?;

        if self.duration.vocabulary.is_empty() {
            return Err(ConfigError::invalid("duration.vocabulary", "must not be empty"));
        }
        if !(self.duration.threshold.is_finite() && self.duration.threshold >= 0.0) {
            return Err(ConfigError::invalid("duration.threshold", "must be non-negative"));
        }

        let t = &self.timing;
        if !(t.histogram_bin_beats.is_finite() && t.histogram_bin_beats > 0.0) {
            return Err(ConfigError::invalid("timing.histogram_bin_beats", "must be positive"));
        }
        if !(t.kde_bandwidth_beats.is_finite() && t.kde_bandwidth_beats > 0.0) {
            return Err(ConfigError::invalid("timing.kde_bandwidth_beats", "must be positive"));
        }
        if !(2..=100_000).contains(&t.kde_samples) {
            return Err(ConfigError::invalid("timing.kde_samples", "must be in 2..=100000"));
        }

        let r = &self.rhythm;
        if r.vocabulary.bases.is_empty() {
            return Err(ConfigError::invalid("rhythm.vocabulary.bases", "must not be empty"));
        }
        if r.vocabulary.max_dots > 2 {
            return Err(ConfigError::invalid("rhythm.vocabulary.max_dots", "at most 2"));
        }
        match r.accent_mode {
            AccentMode::Relative { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                return Err(ConfigError::invalid("rhythm.accent_mode.fraction", "must be in (0, 1]"))
            }
            AccentMode::Threshold { velocity } if !(1..=127).contains(&velocity) => {
                return Err(ConfigError::invalid("rhythm.accent_mode.velocity", "must be in 1..=127"))
            }
            _ => {}
        }
        if let Some(p) = r.accent_pattern {
            if p.period == 0 {
                return Err(ConfigError::invalid("rhythm.accent_pattern.period", "must be positive"));
            }
        }
        if !(r.chord_window_beats.is_finite() && r.chord_window_beats >= 0.0) {
            return Err(ConfigError::invalid("rhythm.chord_window_beats", "must be non-negative"));
        }

        match &self.progression {
            Some(p) => {
                p.build()
                    .map_err(|e| ConfigError::invalid("progression", e))?;
            }
            None if self.kind == DrillKind::ChordProgression => {
                return Err(ConfigError::invalid(
                    "progression",
                    "required for chord-progression drills",
                ))
            }
            None => {}
        }

        let f = &self.fretboard;
        f.tuning
            .validate()
            .map_err(|e| ConfigError::invalid("fretboard.tuning", e))?;
        if f.bars_per_facet == 0 {
            return Err(ConfigError::invalid("fretboard.bars_per_facet", "must be at least 1"));
        }
        let m = &f.movement;
        if !(m.position_frets > 0.0 && m.position_strings > 0.0 && m.dominance >= 1.0) {
            return Err(ConfigError::invalid(
                "fretboard.movement",
                "positions must be positive and dominance at least 1",
            ));
        }

        let v = &self.voices;
        if v.drum_channels.iter().any(|&c| c > 15) {
            return Err(ConfigError::invalid("voices.drum_channels", "channels are 0..=15"));
        }
        if let Some(g) = v.guitar_channels {
            if g.iter().any(|&c| c > 15) {
                return Err(ConfigError::invalid("voices.guitar_channels", "channels are 0..=15"));
            }
            let mut seen = g.to_vec();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != 6 {
                return Err(ConfigError::invalid("voices.guitar_channels", "channels must differ"));
            }
        }
        if v.drum_overrides.iter().any(|o| o.pitch > 127) {
            return Err(ConfigError::invalid("voices.drum_overrides", "pitches are 0..=127"));
        }

        if let Some(s) = &self.synth {
            let spec = self.pattern(s);
            spec.validate()
                .map_err(|e| ConfigError::invalid("synth.slots", e.0))?;
            s.model
                .validate()
                .map_err(|e| ConfigError::invalid("synth.model", e.0))?;
        }
        Ok(())
    }

    /// The chord progression; `None` unless configured.
    pub fn chord_progression(&self) -> Option<ChordProgression> {
        self.progression.as_ref().and_then(|p| p.build().ok())
    }

    pub fn voice_map(&self) -> VoiceMap {
        let overrides = self
            .voices
            .drum_overrides
            .iter()
            .map(|o| (o.pitch, o.voice))
            .collect();
        let map = VoiceMap::new(&self.voices.drum_channels, DrumMap::with_overrides(&overrides));
        match (self.voices.guitar_channels, self.kind) {
            (Some(ch), _) => map.with_guitar_channels(ch),
            (None, DrillKind::Fretboard) => map.with_guitar_channels([0, 1, 2, 3, 4, 5]),
            _ => map,
        }
    }

    pub fn pattern(&self, section: &SynthSection) -> PatternSpec {
        PatternSpec {
            grid: self.grid,
            slots: section.slots.clone(),
            repetitions: section.repetitions,
            tuning: self.fretboard.tuning,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

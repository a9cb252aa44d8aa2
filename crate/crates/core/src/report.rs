//! Versioned analysis report: one section per drill kind.

use std::num::NonZeroUsize;
use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{DrillConfig, DrillKind};
use crate::duration::{classify_duration, pie_geometry, DurationEntry, DurationError, Verdict};
use crate::fretboard::{analyze_fretboard, fret_notes, FretboardError, FretboardReport};
use crate::grid::GridConfig;
use crate::harmony::{annotate_notes, bin_notes, ChordProgression, HarmonyNote, Waffle};
use crate::midi::{parse_smf_with, IngestWarning, PerformanceStream, SmfError};
use crate::rhythm::{
    check_accent_pattern, quantization_ranges, quantize_onsets, representable_set, QuantRange,
    QuantizedNote, RhythmError,
};
use crate::timing::{build_records, compare_takes, summarize, voice_scores, TimingSummary, VoiceScore};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VerdictCounts {
    pub good: usize,
    pub too_short: usize,
    pub too_long: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DurationSection {
    pub entries: Vec<DurationEntry>,
    pub counts: VerdictCounts,
    /// Notes still held.
    pub open_notes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimingSection {
    pub summary: TimingSummary,
    pub voices: Vec<VoiceScore>,
    /// Every take of the session, oldest first; the last is the current one.
    pub takes: Vec<TimingSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RhythmSection {
    pub notes: Vec<QuantizedNote>,
    /// One flag per onset (chords merged).
    pub accents: Vec<bool>,
    /// Onsets whose accent disagrees with the prescribed pattern.
    pub pattern_mismatches: Vec<usize>,
    /// All onsets equally loud, so accents cannot be told apart.
    pub no_dynamic_contrast: bool,
    pub ranges: Vec<QuantRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HarmonySection {
    pub progression: ChordProgression,
    pub waffle: Waffle,
    pub notes: Vec<HarmonyNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Report {
    pub schema_version: u32,
    pub drill: DrillKind,
    pub grid: GridConfig,
    pub note_count: usize,
    pub warnings: Vec<IngestWarning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<DurationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhythm: Option<RhythmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmony: Option<HarmonySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fretboard: Option<FretboardReport>,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Smf(#[from] SmfError),
    #[error(transparent)]
    Duration(#[from] DurationError),
    #[error(transparent)]
    Rhythm(#[from] RhythmError),
    #[error(transparent)]
    Fretboard(#[from] FretboardError),
    #[error("the drill has no chord progression")]
    MissingProgression,
}

/// Analyzes one take.
pub fn analyze(config: &DrillConfig, stream: &PerformanceStream) -> Result<Report, AnalysisError> {
    analyze_takes(config, &[], stream)
}

/// Analyzes the current take; earlier takes only feed the take comparison.
pub fn analyze_takes(
    config: &DrillConfig,
    earlier: &[PerformanceStream],
    stream: &PerformanceStream,
) -> Result<Report, AnalysisError> {
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        drill: config.kind,
        grid: config.grid,
        note_count: stream.len(),
        warnings: stream.warnings.clone(),
        duration: None,
        timing: None,
        rhythm: None,
        harmony: None,
        fretboard: None,
    };
    let grid = &config.grid;
    match config.kind {
        DrillKind::Duration => report.duration = Some(duration_section(config, stream)?),
        DrillKind::Timing => {
            let records = build_records(stream, grid);
            let mut takes: Vec<_> = earlier.iter().map(|s| build_records(s, grid)).collect();
            takes.push(records.clone());
            report.timing = Some(TimingSection {
                summary: summarize(&records, grid, &config.timing),
                voices: voice_scores(&records, grid.tolerance_beats),
                takes: compare_takes(&takes, grid, &config.timing),
            });
        }
        DrillKind::Accents => report.rhythm = Some(rhythm_section(config, stream)?),
        DrillKind::ChordProgression => {
            let progression = config
                .chord_progression()
                .ok_or(AnalysisError::MissingProgression)?;
            report.harmony = Some(HarmonySection {
                waffle: bin_notes(stream, grid, &progression),
                notes: annotate_notes(stream, grid, &progression),
                progression,
            });
        }
        DrillKind::Fretboard => {
            let (notes, warnings) = fret_notes(stream, grid, &config.fretboard.tuning);
            report.warnings.extend(warnings);
            report.fretboard = Some(analyze_fretboard(
                &notes,
                grid,
                config.fretboard.bars_per_facet,
                &config.fretboard.movement,
            )?);
        }
    }
    Ok(report)
}

fn duration_section(
    config: &DrillConfig,
    stream: &PerformanceStream,
) -> Result<DurationSection, AnalysisError> {
    let grid = &config.grid;
    let mut entries = Vec::new();
    let mut counts = VerdictCounts::default();
    let mut open_notes = 0;
    for e in stream.events() {
        let Some(held) = e.duration() else {
            open_notes += 1;
            continue;
        };
        let held_beats = grid.seconds_to_beats(held);
        if held_beats <= 0.0 {
            continue;
        }
        let verdict = classify_duration(held_beats, &config.duration.vocabulary, config.duration.threshold)?;
        match verdict.verdict {
            Verdict::Good => counts.good += 1,
            Verdict::TooShort => counts.too_short += 1,
            Verdict::TooLong => counts.too_long += 1,
        }
        entries.push(DurationEntry {
            onset_beats: grid.seconds_to_beats(e.onset),
            pitch: e.pitch,
            pie: pie_geometry(held_beats),
            verdict,
        });
    }
    Ok(DurationSection {
        entries,
        counts,
        open_notes,
    })
}

fn rhythm_section(
    config: &DrillConfig,
    stream: &PerformanceStream,
) -> Result<RhythmSection, AnalysisError> {
    let grid = &config.grid;
    let params = &config.rhythm;
    let set = representable_set(&params.vocabulary);
    let onsets: Vec<(f64, u8)> = stream
        .events()
        .iter()
        .map(|e| (grid.seconds_to_beats(e.onset), e.velocity))
        .collect();
    let (notes, accents) =
        quantize_onsets(&onsets, &set, params.accent_mode, params.chord_window_beats)?;
    let pattern_mismatches = match params.accent_pattern {
        Some(p) => NonZeroUsize::new(p.period)
            .map(|period| check_accent_pattern(&accents, period, p.offset))
            .unwrap_or_default(),
        None => Vec::new(),
    };
    let vel = stream.events().iter().map(|e| e.velocity);
    let no_dynamic_contrast = stream.len() > 1 && vel.clone().min() == vel.max();
    Ok(RhythmSection {
        notes,
        accents,
        pattern_mismatches,
        no_dynamic_contrast,
        ranges: quantization_ranges(&set).unwrap_or_default(),
    })
}

/// Parses an SMF with the drill's voice map and analyzes it.
pub fn analyze_file(config: &DrillConfig, path: &Path) -> Result<Report, AnalysisError> {
    let bytes = std::fs::read(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    analyze_bytes(config, &bytes)
}

pub fn analyze_bytes(config: &DrillConfig, bytes: &[u8]) -> Result<Report, AnalysisError> {
    let parsed = parse_smf_with(bytes, &config.voice_map())?;
    analyze(config, &parsed.stream)
}

/// JSON Schema of the report document.
pub fn report_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Report)).unwrap_or_default()
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

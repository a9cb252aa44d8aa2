//! Guitar notes in (string, fret) space, faceted by bar, with movement
//! statistics and octave-shift detection.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridConfig;
use crate::midi::{derive_string_fret, IngestWarning, PerformanceStream, Tuning};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FretNote {
    /// 1 is the highest string.
    pub string: u8,
    pub fret: u8,
    pub onset_beats: f64,
    pub velocity: u8,
    pub pitch: u8,
    /// Seed for reproducible render-side jitter.
    pub jitter_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FretboardError {
    #[error("the facet has no notes")]
    EmptyFacet,
    #[error("bars_per_facet must be at least 1")]
    ZeroFacetSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Extent {
    pub min: u8,
    pub max: u8,
    pub centroid: f64,
}

impl Extent {
    fn of(values: impl Iterator<Item = u8> + Clone) -> Option<Extent> {
        let n = values.clone().count();
        if n == 0 {
            return None;
        }
        let min = values.clone().min()?;
        let max = values.clone().max()?;
        let centroid = values.map(f64::from).sum::<f64>() / n as f64;
        Some(Extent {
            min,
            max,
            centroid: centroid.clamp(min as f64, max as f64),
        })
    }

    pub fn span(&self) -> f64 {
        (self.max - self.min) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FacetStats {
    pub bar_index: u64,
    pub note_count: usize,
    pub fret: Option<Extent>,
    pub string: Option<Extent>,
    /// Count per pitch class, C first.
    pub pitch_classes: [u32; 12],
    /// Notes on fret 0.
    pub open_string_count: usize,
}

impl FacetStats {
    pub fn from_notes(bar_index: u64, notes: &[FretNote]) -> Self {
        let mut pitch_classes = [0u32; 12];
        for n in notes {
            pitch_classes[(n.pitch % 12) as usize] += 1;
        }
        FacetStats {
            bar_index,
            note_count: notes.len(),
            fret: Extent::of(notes.iter().map(|n| n.fret)),
            string: Extent::of(notes.iter().map(|n| n.string)),
            pitch_classes,
            open_string_count: notes.iter().filter(|n| n.fret == 0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Facet {
    pub notes: Vec<FretNote>,
    pub stats: FacetStats,
}

/// Per-note seed: splitmix64 over the note's identity.
pub fn jitter_seed(string: u8, fret: u8, onset_beats: f64) -> u64 {
    let mut z = onset_beats.to_bits() ^ ((string as u64) << 56) ^ ((fret as u64) << 48);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Converts guitar-string events; others are skipped, impossible positions
/// become warnings.
pub fn fret_notes(
    stream: &PerformanceStream,
    grid: &GridConfig,
    tuning: &Tuning,
) -> (Vec<FretNote>, Vec<IngestWarning>) {
    let mut notes = Vec::new();
    let mut warnings = Vec::new();
    for e in stream.events() {
        if !matches!(e.voice, crate::midi::VoiceTag::GuitarString(_)) {
            continue;
        }
        match derive_string_fret(e, tuning) {
            Ok((string, fret)) => {
                let onset_beats = grid.seconds_to_beats(e.onset);
                notes.push(FretNote {
                    string,
                    fret,
                    onset_beats,
                    velocity: e.velocity,
                    pitch: e.pitch,
                    jitter_seed: jitter_seed(string, fret, onset_beats),
                });
            }
            Err(err) => warnings.push(IngestWarning::MalformedMessage {
                detail: format!("pitch {} at {:.3}s: {err}", e.pitch, e.onset),
            }),
        }
    }
    (notes, warnings)
}

/// Partitions notes into consecutive facets of `bars_per_facet` bars.
/// Facets between the first and last are always present, even when empty.
pub fn facet_by_bar(
    notes: &[FretNote],
    grid: &GridConfig,
    bars_per_facet: u32,
) -> Result<Vec<Facet>, FretboardError> {
    if bars_per_facet == 0 {
        return Err(FretboardError::ZeroFacetSize);
    }
    let width = grid.beats_per_bar as f64 * bars_per_facet as f64;
    let index = |n: &FretNote| (n.onset_beats.max(0.0) / width).floor() as u64;
    let Some(last) = notes.iter().map(index).max() else {
        return Ok(Vec::new());
    };
    let mut buckets: Vec<Vec<FretNote>> = vec![Vec::new(); last as usize + 1];
    for n in notes {
        buckets[index(n) as usize].push(*n);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut notes)| {
            notes.sort_by(|a, b| {
                a.onset_beats
                    .total_cmp(&b.onset_beats)
                    .then(a.pitch.cmp(&b.pitch))
            });
            let stats = FacetStats::from_notes(i as u64, &notes);
            Facet { notes, stats }
        })
        .collect())
}

/// `i/(n-1)` for the i-th note by onset; equal onsets order by pitch.
/// Values are returned in input order.
pub fn temporal_color_index(notes: &[FretNote]) -> Result<Vec<f64>, FretboardError> {
    if notes.is_empty() {
        return Err(FretboardError::EmptyFacet);
    }
    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by(|&a, &b| {
        notes[a]
            .onset_beats
            .total_cmp(&notes[b].onset_beats)
            .then(notes[a].pitch.cmp(&notes[b].pitch))
    });
    let mut out = vec![0.0; notes.len()];
    if notes.len() > 1 {
        let denom = (notes.len() - 1) as f64;
        for (rank, &i) in order.iter().enumerate() {
            out[i] = rank as f64 / denom;
        }
    }
    Ok(out)
}

/// Whether two count vectors are equal up to a positive scale factor.
fn proportional(a: &[u32; 12], b: &[u32; 12]) -> bool {
    let sa: u64 = a.iter().map(|&x| x as u64).sum();
    let sb: u64 = b.iter().map(|&x| x as u64).sum();
    sa > 0 && sb > 0 && a.iter().zip(b).all(|(&x, &y)| x as u64 * sb == y as u64 * sa)
}

/// Fret offset from `a` to `b` when both facets hold the same pitch-class
/// mix in a different position. About ±12 means the same notes an octave
/// apart.
pub fn detect_octave_shift(a: &FacetStats, b: &FacetStats) -> Option<i32> {
    let (fa, fb) = (a.fret?, b.fret?);
    if !proportional(&a.pitch_classes, &b.pitch_classes) {
        return None;
    }
    let d = fb.centroid - fa.centroid;
    // Round half away from zero keeps the result antisymmetric.
    let offset = d.round() as i32;
    (offset.abs() >= 1).then_some(offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Horizontal,
    Vertical,
    Mixed,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct MovementThresholds {
    /// Frets covered by one hand position.
    pub position_frets: f64,
    /// Strings covered by one hand position.
    pub position_strings: f64,
    /// Ratio at which one direction dominates.
    pub dominance: f64,
}

impl Default for MovementThresholds {
    fn default() -> Self {
        MovementThresholds {
            position_frets: 4.0,
            position_strings: 2.0,
            dominance: 2.0,
        }
    }
}

pub fn movement_class(stats: &FacetStats, t: &MovementThresholds) -> Movement {
    let (Some(f), Some(s)) = (stats.fret, stats.string) else {
        return Movement::Stationary;
    };
    let h = f.span() / t.position_frets;
    let v = s.span() / t.position_strings;
    if h < 1.0 && v < 1.0 {
        Movement::Stationary
    } else if h >= t.dominance * v {
        Movement::Horizontal
    } else if v >= t.dominance * h {
        Movement::Vertical
    } else {
        Movement::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FacetReport {
    pub stats: FacetStats,
    pub movement: Movement,
    pub notes: Vec<FretNote>,
    /// Same order as `notes`.
    pub color_index: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OctaveShift {
    pub from_facet: u64,
    pub to_facet: u64,
    pub fret_offset: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FretboardReport {
    pub bars_per_facet: u32,
    pub facets: Vec<FacetReport>,
    /// Shifts between each facet and the next non-empty one.
    pub octave_shifts: Vec<OctaveShift>,
}

pub fn analyze_fretboard(
    notes: &[FretNote],
    grid: &GridConfig,
    bars_per_facet: u32,
    thresholds: &MovementThresholds,
) -> Result<FretboardReport, FretboardError> {
    let facets = facet_by_bar(notes, grid, bars_per_facet)?;
    let filled: Vec<&Facet> = facets.iter().filter(|f| f.stats.note_count > 0).collect();
    let octave_shifts = filled
        .windows(2)
        .filter_map(|w| {
            detect_octave_shift(&w[0].stats, &w[1].stats).map(|fret_offset| OctaveShift {
                from_facet: w[0].stats.bar_index,
                to_facet: w[1].stats.bar_index,
                fret_offset,
            })
        })
        .collect();
    let facets = facets
        .into_iter()
        .map(|f| FacetReport {
            movement: movement_class(&f.stats, thresholds),
            color_index: temporal_color_index(&f.notes).unwrap_or_default(),
            stats: f.stats,
            notes: f.notes,
        })
        .collect();
    Ok(FretboardReport {
        bars_per_facet,
        facets,
        octave_shifts,
    })
}

//! Timing consistency: onsets folded over drill repetitions and snapped to the
//! grid, tolerance scores, and histogram / density aggregations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{circular_angle, GridConfig, GridPoint};
use crate::midi::{PerformanceStream, VoiceTag};

/// A 32nd note.
pub const DEFAULT_BIN_WIDTH: f64 = 0.125;
pub const DEFAULT_BANDWIDTH: f64 = 0.02;
pub const DEFAULT_DENSITY_SAMPLES: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct TimingParams {
    pub histogram_bin_beats: f64,
    pub kde_bandwidth_beats: f64,
    pub kde_samples: usize,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            histogram_bin_beats: DEFAULT_BIN_WIDTH,
            kde_bandwidth_beats: DEFAULT_BANDWIDTH,
            kde_samples: DEFAULT_DENSITY_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimingError {
    #[error("no onset records")]
    EmptyInput,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

/// One onset relative to its grid slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OnsetRecord {
    /// Negative is early, positive is late.
    pub deviation_beats: f64,
    pub grid: GridPoint,
    /// Angle of the played phase on the circular layout.
    pub angle: f64,
    pub velocity: u8,
    pub voice: VoiceTag,
    pub pitch: u8,
}

/// One record per note, open notes included. Onsets more than half a step
/// before the first downbeat have no slot and are skipped.
pub fn build_records(stream: &PerformanceStream, grid: &GridConfig) -> Vec<OnsetRecord> {
    let half = grid.half_step();
    stream
        .events()
        .iter()
        .filter_map(|e| {
            let beats = grid.seconds_to_beats(e.onset);
            if beats < -half {
                return None;
            }
            let (point, deviation) = if beats < 0.0 {
                (
                    GridPoint {
                        repetition: 0,
                        index: 0,
                        beat_in_cycle: 0.0,
                    },
                    beats,
                )
            } else {
                grid.locate(beats)
            };
            let phase = point.beat_in_cycle + deviation;
            Some(OnsetRecord {
                deviation_beats: deviation,
                grid: point,
                angle: circular_angle(phase.rem_euclid(grid.cycle_beats), grid.cycle_beats),
                velocity: e.velocity,
                voice: e.voice,
                pitch: e.pitch,
            })
        })
        .collect()
}

/// Percentage of records within `tolerance` of their slot.
pub fn tolerance_score(records: &[OnsetRecord], tolerance_beats: f64) -> Result<f64, TimingError> {
    if records.is_empty() {
        return Err(TimingError::EmptyInput);
    }
    let inside = records
        .iter()
        .filter(|r| r.deviation_beats.abs() <= tolerance_beats)
        .count();
    Ok(100.0 * inside as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HistogramBin {
    /// Bin number; bin `k` is centered on `k * width`.
    pub index: i64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Histogram {
    pub bin_width: f64,
    /// Contiguous bins from the lowest to the highest occupied one.
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Bins deviations around the slot. Bin `k` covers
/// `[(k - 1/2) w, (k + 1/2) w)`, so a value on an edge goes to the later bin.
pub fn histogram(records: &[OnsetRecord], bin_width: f64) -> Result<Histogram, TimingError> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(TimingError::NonPositive("bin width"));
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for r in records {
        let k = (r.deviation_beats / bin_width + 0.5).floor() as i64;
        *counts.entry(k).or_default() += 1;
    }
    let bins = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|k| HistogramBin {
                index: k,
                lo: (k as f64 - 0.5) * bin_width,
                hi: (k as f64 + 0.5) * bin_width,
                count: counts.get(&k).copied().unwrap_or(0),
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(Histogram { bin_width, bins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DensityCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DensityCurve {
    pub fn mode(&self) -> Option<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| *x)
    }
}

/// Gaussian kernel density of the deviations, sampled uniformly on
/// `[-half_width, half_width]` and scaled so its trapezoid integral is 1.
pub fn density(
    records: &[OnsetRecord],
    bandwidth: f64,
    samples: usize,
    half_width: f64,
) -> Result<DensityCurve, TimingError> {
    if records.is_empty() {
        return Err(TimingError::EmptyInput);
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(TimingError::NonPositive("bandwidth"));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(TimingError::NonPositive("support"));
    }
    let samples = samples.max(2);
    let step = 2.0 * half_width / (samples - 1) as f64;
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * records.len() as f64);
    // Sorted so the sums, and therefore the curve, do not depend on order.
    let mut devs: Vec<f64> = records.iter().map(|r| r.deviation_beats).collect();
    devs.sort_by(f64::total_cmp);
    let x: Vec<f64> = (0..samples).map(|i| -half_width + i as f64 * step).collect();
    let mut y: Vec<f64> = x
        .iter()
        .map(|&xi| {
            devs.iter()
                .map(|d| {
                    let z = (xi - d) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let area: f64 = y.windows(2).map(|w| (w[0] + w[1]) * step / 2.0).sum();
    if area > 0.0 {
        y.iter_mut().for_each(|v| *v /= area);
    } else {
        // All mass lies far outside the support; fall back to uniform.
        let u = 1.0 / (2.0 * half_width);
        y.iter_mut().for_each(|v| *v = u);
    }
    Ok(DensityCurve { bandwidth, x, y })
}

/// Records of one repetition, in onset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimingRow {
    pub repetition: u64,
    pub records: Vec<OnsetRecord>,
}

impl TimingRow {
    pub fn mean_deviation(&self) -> Option<f64> {
        if self.records.is_empty() {
            None
        } else {
            Some(
                self.records.iter().map(|r| r.deviation_beats).sum::<f64>()
                    / self.records.len() as f64,
            )
        }
    }
}

pub fn group_rows(records: &[OnsetRecord]) -> Vec<TimingRow> {
    let mut rows: BTreeMap<u64, Vec<OnsetRecord>> = BTreeMap::new();
    for r in records {
        rows.entry(r.grid.repetition).or_default().push(r.clone());
    }
    rows.into_iter()
        .map(|(repetition, records)| TimingRow {
            repetition,
            records,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimingSummary {
    pub rows: Vec<TimingRow>,
    /// `None` before the first onset.
    pub score_percent: Option<f64>,
    pub histogram: Histogram,
    pub density: Option<DensityCurve>,
}

pub fn summarize(records: &[OnsetRecord], grid: &GridConfig, params: &TimingParams) -> TimingSummary {
    TimingSummary {
        rows: group_rows(records),
        score_percent: tolerance_score(records, grid.tolerance_beats).ok(),
        histogram: histogram(records, params.histogram_bin_beats).unwrap_or(Histogram {
            bin_width: params.histogram_bin_beats,
            bins: Vec::new(),
        }),
        density: density(
            records,
            params.kde_bandwidth_beats,
            params.kde_samples,
            grid.half_step(),
        )
        .ok(),
    }
}

/// Partitions records by voice (one row per drum kind).
pub fn split_by_voice(records: &[OnsetRecord]) -> BTreeMap<VoiceTag, Vec<OnsetRecord>> {
    let mut out: BTreeMap<VoiceTag, Vec<OnsetRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.voice).or_default().push(r.clone());
    }
    out
}

/// Two rhythms played together, aligned by repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PairedRow {
    pub repetition: u64,
    pub a: Vec<OnsetRecord>,
    pub b: Vec<OnsetRecord>,
}

pub fn split_streams(a: &[OnsetRecord], b: &[OnsetRecord]) -> Vec<PairedRow> {
    let mut rows: BTreeMap<u64, PairedRow> = BTreeMap::new();
    for r in a {
        row_mut(&mut rows, r.grid.repetition).a.push(r.clone());
    }
    for r in b {
        row_mut(&mut rows, r.grid.repetition).b.push(r.clone());
    }
    rows.into_values().collect()
}

fn row_mut(rows: &mut BTreeMap<u64, PairedRow>, rep: u64) -> &mut PairedRow {
    rows.entry(rep).or_insert_with(|| PairedRow {
        repetition: rep,
        a: Vec::new(),
        b: Vec::new(),
    })
}

/// One summary per take, oldest first.
pub fn compare_takes(
    takes: &[Vec<OnsetRecord>],
    grid: &GridConfig,
    params: &TimingParams,
) -> Vec<TimingSummary> {
    takes.iter().map(|t| summarize(t, grid, params)).collect()
}

/// Score and count for one voice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VoiceScore {
    pub voice: VoiceTag,
    pub count: usize,
    pub score_percent: f64,
}

pub fn voice_scores(records: &[OnsetRecord], tolerance_beats: f64) -> Vec<VoiceScore> {
    split_by_voice(records)
        .into_iter()
        .filter_map(|(voice, recs)| {
            Some(VoiceScore {
                voice,
                count: recs.len(),
                score_percent: tolerance_score(&recs, tolerance_beats).ok()?,
            })
        })
        .collect()
}

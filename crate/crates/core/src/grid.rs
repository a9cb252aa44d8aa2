//! Seconds/beats conversion, folding time into drill repetitions, and snapping
//! onsets to the subdivision grid.
//!
//! Deviations are signed: negative means early, positive means late.

use std::f64::consts::TAU;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What the system knows about the drill's clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct GridConfig {
    pub bpm: f64,
    pub beats_per_bar: u32,
    /// Equal parts per beat: 2 for eighths, 3 for triplets.
    pub subdivision: u32,
    /// Beats per repetition of the drill.
    pub cycle_beats: f64,
    /// Half-width of the acceptance zone around each grid point.
    pub tolerance_beats: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            bpm: 120.0,
            beats_per_bar: 4,
            subdivision: 2,
            cycle_beats: 4.0,
            tolerance_beats: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("grid.{field}: {reason}")]
pub struct GridError {
    pub field: &'static str,
    pub reason: String,
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let err = |field, reason: &str| {
            Err(GridError {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.bpm.is_finite() && self.bpm > 0.0) {
            return err("bpm", "must be a positive number");
        }
        if self.beats_per_bar == 0 {
            return err("beats_per_bar", "must be positive");
        }
        if self.subdivision == 0 {
            return err("subdivision", "must be positive");
        }
        if !(self.cycle_beats.is_finite() && self.cycle_beats > 0.0) {
            return err("cycle_beats", "must be a positive number");
        }
        let slots = self.cycle_beats * self.subdivision as f64;
        if (slots - slots.round()).abs() > 1e-9 || slots.round() > u32::MAX as f64 {
            return err("cycle_beats", "must be a whole number of subdivision steps");
        }
        if !(self.tolerance_beats.is_finite() && self.tolerance_beats >= 0.0) {
            return err("tolerance_beats", "must be a non-negative number");
        }
        Ok(())
    }

    /// Length of one grid step in beats.
    pub fn step(&self) -> f64 {
        1.0 / self.subdivision as f64
    }

    pub fn half_step(&self) -> f64 {
        0.5 / self.subdivision as f64
    }

    pub fn slots_per_cycle(&self) -> u32 {
        (self.cycle_beats * self.subdivision as f64).round() as u32
    }

    pub fn seconds_to_beats(&self, t: f64) -> f64 {
        seconds_to_beats(t, self.bpm)
    }

    pub fn beats_to_seconds(&self, beats: f64) -> f64 {
        beats * 60.0 / self.bpm
    }

    /// Folds an onset into its repetition and snaps it to the nearest slot,
    /// carrying into the next repetition when the nearest slot wraps.
    pub fn locate(&self, onset_beats: f64) -> (GridPoint, f64) {
        let (rep, phase) = fold(onset_beats, self.cycle_beats);
        let (mut point, dev) = nearest_grid(phase, self.cycle_beats, self.subdivision);
        point.repetition += rep;
        (point, dev)
    }
}

/// A slot of the subdivision grid in a given repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GridPoint {
    pub repetition: u64,
    pub index: u32,
    pub beat_in_cycle: f64,
}

pub fn seconds_to_beats(t: f64, bpm: f64) -> f64 {
    t * bpm / 60.0
}

/// Splits an onset into (repetition, phase) with `0 <= phase < cycle`.
pub fn fold(onset_beats: f64, cycle_beats: f64) -> (u64, f64) {
    let onset = onset_beats.max(0.0);
    let mut rep = (onset / cycle_beats).floor();
    let mut phase = onset - rep * cycle_beats;
    if phase < 0.0 && rep > 0.0 {
        rep -= 1.0;
        phase = onset - rep * cycle_beats;
    } else if phase >= cycle_beats {
        rep += 1.0;
        phase = onset - rep * cycle_beats;
    }
    (rep as u64, phase.clamp(0.0, cycle_beats.next_down()))
}

/// Snaps a phase to the slot at minimal circular distance.
///
/// The returned point's `repetition` is 1 when the nearest slot is slot 0 of
/// the next cycle, else 0; callers add it to the folded repetition.
pub fn nearest_grid(phase_beats: f64, cycle_beats: f64, subdivision: u32) -> (GridPoint, f64) {
    let sub = subdivision.max(1) as f64;
    let slots = (cycle_beats * sub).round().max(1.0) as u64;
    let k = (phase_beats * sub).round().max(0.0) as u64;
    let deviation = phase_beats - k as f64 / sub;
    let (carry, index) = if k >= slots { (1, 0) } else { (0, k as u32) };
    (
        GridPoint {
            repetition: carry,
            index,
            beat_in_cycle: index as f64 / sub,
        },
        deviation,
    )
}

/// Position on the circular layout, in `[0, 2π)`.
pub fn circular_angle(phase_beats: f64, cycle_beats: f64) -> f64 {
    let a = TAU * phase_beats / cycle_beats;
    if !(0.0..TAU).contains(&a) {
        a.rem_euclid(TAU) % TAU
    } else {
        a
    }
}

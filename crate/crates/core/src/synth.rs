//! Seeded generator of imperfect performances: jitter, warm-up lateness,
//! tempo drift, ghost notes and accent patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridConfig;
use crate::midi::{DrumVoice, NoteEvent, PerformanceStream, Tuning, VoiceMap, VoiceTag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid synthesis spec: {0}")]
pub struct SynthError(pub String);

/// What a struck slot sounds like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sound {
    Pitch {
        pitch: u8,
        #[serde(default)]
        channel: u8,
    },
    Fret {
        string: u8,
        fret: u8,
    },
    Drum {
        voice: DrumVoice,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Slot {
    /// Subdivision slot within the cycle.
    pub index: u32,
    pub sound: Sound,
    /// Held length; defaults to 90% of the gap to the next struck slot.
    #[serde(default)]
    pub hold_beats: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PatternSpec {
    pub grid: GridConfig,
    pub slots: Vec<Slot>,
    pub repetitions: u32,
    #[serde(default)]
    pub tuning: Tuning,
}

impl PatternSpec {
    /// Every slot of the cycle struck with the same sound.
    pub fn every_slot(grid: GridConfig, sound: Sound, repetitions: u32) -> Self {
        PatternSpec {
            slots: (0..grid.slots_per_cycle())
                .map(|index| Slot {
                    index,
                    sound,
                    hold_beats: None,
                })
                .collect(),
            grid,
            repetitions,
            tuning: Tuning::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.grid
            .validate()
            .map_err(|e| SynthError(e.to_string()))?;
        let slots = self.grid.slots_per_cycle();
        for s in &self.slots {
            if s.index >= slots {
                return Err(SynthError(format!(
                    "slot {} outside the cycle of {slots} slots",
                    s.index
                )));
            }
            if let Some(h) = s.hold_beats {
                if !(h.is_finite() && h > 0.0) {
                    return Err(SynthError(format!("slot {}: hold must be positive", s.index)));
                }
            }
            match s.sound {
                Sound::Pitch { pitch, channel } if pitch > 127 || channel > 15 => {
                    return Err(SynthError(format!("slot {}: pitch or channel out of range", s.index)))
                }
                Sound::Fret { string, fret } => {
                    let open = self
                        .tuning
                        .open_pitch(string)
                        .ok_or_else(|| SynthError(format!("slot {}: no string {string}", s.index)))?;
                    if fret > self.tuning.max_fret || open as u32 + fret as u32 > 127 {
                        return Err(SynthError(format!("slot {}: fret {fret} out of range", s.index)));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    #[default]
    Linear,
    Exponential,
}

/// Systematic lateness that fades over the first repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Warmup {
    pub initial_beats: f64,
    pub decay_repetitions: f64,
    #[serde(default)]
    pub shape: DecayShape,
}

impl Warmup {
    pub fn lateness(&self, repetition: u32) -> f64 {
        let r = repetition as f64;
        match self.shape {
            DecayShape::Linear => self.initial_beats * (1.0 - r / self.decay_repetitions).max(0.0),
            DecayShape::Exponential => self.initial_beats * (-r / self.decay_repetitions).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AccentPattern {
    /// Every `period`-th strike is accented, starting at `offset`.
    pub period: u32,
    #[serde(default)]
    pub offset: u32,
    pub accent_velocity: u8,
    pub base_velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ErrorModel {
    pub jitter_std_beats: f64,
    pub warmup: Option<Warmup>,
    /// Beats gained per repetition; positive means rushing.
    pub tempo_drift_beats: f64,
    pub ghost_note_prob: f64,
    pub ghost_velocity_max: u8,
    pub velocity_noise_std: f64,
    /// Velocity of every strike when no accent pattern is given.
    pub base_velocity: u8,
    pub accent: Option<AccentPattern>,
    pub seed: u64,
}

impl Default for ErrorModel {
    /// The noiseless model.
    fn default() -> Self {
        ErrorModel {
            jitter_std_beats: 0.0,
            warmup: None,
            tempo_drift_beats: 0.0,
            ghost_note_prob: 0.0,
            ghost_velocity_max: 20,
            velocity_noise_std: 0.0,
            base_velocity: 80,
            accent: None,
            seed: 0,
        }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError(m.to_string()));
        if !(self.jitter_std_beats.is_finite() && self.jitter_std_beats >= 0.0) {
            return bad("jitter_std_beats must be non-negative");
        }
        if !(self.velocity_noise_std.is_finite() && self.velocity_noise_std >= 0.0) {
            return bad("velocity_noise_std must be non-negative");
        }
        if !(0.0..1.0).contains(&self.ghost_note_prob) {
            return bad("ghost_note_prob must be in [0, 1)");
        }
        if !self.tempo_drift_beats.is_finite() {
            return bad("tempo_drift_beats must be finite");
        }
        if !(1..=127).contains(&self.ghost_velocity_max) || !(1..=127).contains(&self.base_velocity) {
            return bad("velocities must be in 1..=127");
        }
        if let Some(w) = &self.warmup {
            if !(w.initial_beats.is_finite() && w.decay_repetitions > 0.0) {
                return bad("warmup needs finite lateness and positive decay");
            }
        }
        if let Some(a) = &self.accent {
            if a.period == 0 {
                return bad("accent period must be positive");
            }
            if !(1..=127).contains(&a.accent_velocity) || !(1..=127).contains(&a.base_velocity) {
                return bad("accent velocities must be in 1..=127");
            }
        }
        Ok(())
    }
}

/// Shortest gap kept between two notes on the same key, in seconds.
const MIN_SAME_KEY_GAP: f64 = 0.005;

fn voice_map_for(spec: &PatternSpec) -> VoiceMap {
    if spec.slots.iter().any(|s| matches!(s.sound, Sound::Fret { .. })) {
        VoiceMap::guitar_default()
    } else {
        VoiceMap::default()
    }
}

/// Generates with the default voice map: drums on channel 9, and guitar
/// strings 1-6 on channels 0-5 when the pattern uses frets.
pub fn generate(spec: &PatternSpec, model: &ErrorModel) -> Result<PerformanceStream, SynthError> {
    generate_with(spec, model, &voice_map_for(spec))
}

pub fn generate_with(
    spec: &PatternSpec,
    model: &ErrorModel,
    voices: &VoiceMap,
) -> Result<PerformanceStream, SynthError> {
    spec.validate()?;
    model.validate()?;
    let grid = &spec.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let jitter = Normal::new(0.0, model.jitter_std_beats).map_err(|e| SynthError(e.to_string()))?;
    let vel_noise =
        Normal::new(0.0, model.velocity_noise_std).map_err(|e| SynthError(e.to_string()))?;

    let mut slots = spec.slots.clone();
    slots.sort_by_key(|s| s.index);
    let step = grid.step();
    let cycle = grid.cycle_beats;
    let holds: Vec<f64> = slots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.hold_beats.unwrap_or_else(|| {
                let here = s.index as f64 * step;
                let next = match slots[i + 1..].iter().find(|n| n.index > s.index) {
                    Some(n) => n.index as f64 * step,
                    None => slots[0].index as f64 * step + cycle,
                };
                0.9 * (next - here)
            })
        })
        .collect();

    let mut events = Vec::new();
    let mut strike = 0u64;
    for rep in 0..spec.repetitions {
        let late = model.warmup.map_or(0.0, |w| w.lateness(rep));
        let drift = model.tempo_drift_beats * rep as f64;
        for (slot, &hold) in slots.iter().zip(&holds) {
            let nominal = rep as f64 * cycle + slot.index as f64 * step;
            let noise = if model.jitter_std_beats > 0.0 {
                jitter.sample(&mut rng)
            } else {
                0.0
            };
            let onset = (nominal + late - drift + noise).max(0.0);
            let base = match model.accent {
                Some(a) if strike % a.period as u64 == a.offset as u64 % a.period as u64 => {
                    a.accent_velocity
                }
                Some(a) => a.base_velocity,
                None => model.base_velocity,
            };
            let vnoise = if model.velocity_noise_std > 0.0 {
                vel_noise.sample(&mut rng)
            } else {
                0.0
            };
            let velocity = (base as f64 + vnoise).round().clamp(1.0, 127.0) as u8;
            let (pitch, channel, voice) = resolve(slot.sound, &spec.tuning, voices);
            events.push(NoteEvent {
                onset: grid.beats_to_seconds(onset),
                release: Some(grid.beats_to_seconds(onset + hold)),
                pitch,
                velocity,
                channel,
                voice,
            });
            if model.ghost_note_prob > 0.0 && rng.gen_bool(model.ghost_note_prob) {
                let offset = rng.gen_range(-step / 4.0..=step / 4.0);
                let velocity = rng.gen_range(1..=model.ghost_velocity_max);
                let at = (nominal + offset).max(0.0);
                events.push(NoteEvent {
                    onset: grid.beats_to_seconds(at),
                    release: Some(grid.beats_to_seconds(at + step / 4.0)),
                    pitch,
                    velocity,
                    channel,
                    voice,
                });
            }
            strike += 1;
        }
    }
    Ok(PerformanceStream::from_events(separate_same_keys(events)))
}

fn resolve(sound: Sound, tuning: &Tuning, voices: &VoiceMap) -> (u8, u8, VoiceTag) {
    match sound {
        Sound::Pitch { pitch, channel } => (pitch, channel, voices.tag(channel, pitch)),
        Sound::Fret { string, fret } => {
            let pitch = tuning.open_pitch(string).unwrap_or(0) + fret;
            let channel = voices.channel_for_string(string).unwrap_or(string - 1);
            (pitch, channel, VoiceTag::GuitarString(string))
        }
        Sound::Drum { voice } => (voice.representative_pitch(), 9, VoiceTag::Drum(voice)),
    }
}

/// A key cannot sound twice at once: earlier notes are cut at the next onset
/// on the same key, and notes landing right on top of another are dropped.
fn separate_same_keys(mut events: Vec<NoteEvent>) -> Vec<NoteEvent> {
    events.sort_by(NoteEvent::sort_cmp);
    let mut last: std::collections::HashMap<(u8, u8), usize> = Default::default();
    let mut keep = vec![true; events.len()];
    for i in 0..events.len() {
        let key = (events[i].channel, events[i].pitch);
        if let Some(&j) = last.get(&key) {
            let onset = events[i].onset;
            if onset - events[j].onset < MIN_SAME_KEY_GAP {
                keep[i] = false;
                continue;
            }
            if let Some(r) = events[j].release.as_mut() {
                if *r > onset {
                    *r = onset;
                }
            }
        }
        last.insert(key, i);
    }
    events
        .into_iter()
        .zip(keep)
        .filter_map(|(e, k)| k.then_some(e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::{build_records, group_rows, tolerance_score};

    fn eighths(reps: u32) -> PatternSpec {
        PatternSpec::every_slot(
            GridConfig::default(),
            Sound::Pitch {
                pitch: 60,
                channel: 0,
            },
            reps,
        )
    }

    #[test]
    fn noiseless_is_exact() {
        let s = generate(&eighths(4), &ErrorModel::default()).unwrap();
        assert_eq!(s.len(), 32);
        let g = GridConfig::default();
        let recs = build_records(&s, &g);
        assert!(recs.iter().all(|r| r.deviation_beats == 0.0));
        assert_eq!(tolerance_score(&recs, g.tolerance_beats).unwrap(), 100.0);
        assert!(s.events().iter().all(|e| e.velocity == 80));
        assert!((s.events()[0].duration().unwrap() - 0.9 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn warmup_fades_linearly() {
        let model = ErrorModel {
            warmup: Some(Warmup {
                initial_beats: 0.2,
                decay_repetitions: 30.0,
                shape: DecayShape::Linear,
            }),
            ..Default::default()
        };
        let s = generate(&eighths(120), &model).unwrap();
        let rows = group_rows(&build_records(&s, &GridConfig::default()));
        assert_eq!(rows.len(), 120);
        assert!((rows[0].mean_deviation().unwrap() - 0.2).abs() < 1e-9);
        assert!((rows[15].mean_deviation().unwrap() - 0.1).abs() < 1e-9);
        assert!(rows[30..].iter().all(|r| r.mean_deviation().unwrap().abs() < 1e-9));
    }

    #[test]
    fn deterministic() {
        let model = ErrorModel {
            jitter_std_beats: 0.03,
            ghost_note_prob: 0.1,
            velocity_noise_std: 5.0,
            seed: 99,
            ..Default::default()
        };
        let a = generate(&eighths(20), &model).unwrap();
        let b = generate(&eighths(20), &model).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        let c = generate(&eighths(20), &ErrorModel { seed: 100, ..model }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ghost_count_is_binomial() {
        let p = 0.2;
        let (slots, reps) = (8u32, 50u32);
        let n = (slots * reps) as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for seed in 0..10 {
            let model = ErrorModel {
                ghost_note_prob: p,
                ghost_velocity_max: 15,
                seed,
                ..Default::default()
            };
            let s = generate(&eighths(reps), &model).unwrap();
            // Ghosts are the only low-velocity notes; a few may be merged
            // away when they land right on a strike.
            let ghosts = s.events().iter().filter(|e| e.velocity <= 15).count() as f64;
            let dropped = n + ghosts - s.len() as f64;
            let total = ghosts + dropped.max(0.0);
            assert!((total - n * p).abs() <= 3.0 * sigma, "seed {seed}: {total}");
        }
    }

    #[test]
    fn accents_and_drums() {
        let spec = PatternSpec::every_slot(
            GridConfig::default(),
            Sound::Drum {
                voice: DrumVoice::Snare,
            },
            2,
        );
        let model = ErrorModel {
            accent: Some(AccentPattern {
                period: 4,
                offset: 1,
                accent_velocity: 120,
                base_velocity: 60,
            }),
            ..Default::default()
        };
        let s = generate(&spec, &model).unwrap();
        let vel: Vec<u8> = s.events().iter().map(|e| e.velocity).collect();
        assert_eq!(&vel[..8], &[60, 120, 60, 60, 60, 120, 60, 60]);
        assert!(s
            .events()
            .iter()
            .all(|e| e.channel == 9 && e.voice == VoiceTag::Drum(DrumVoice::Snare)));
    }

    #[test]
    fn frets_use_string_channels() {
        let mut spec = eighths(1);
        spec.slots = vec![Slot {
            index: 0,
            sound: Sound::Fret { string: 6, fret: 3 },
            hold_beats: Some(1.0),
        }];
        let s = generate(&spec, &ErrorModel::default()).unwrap();
        let e = &s.events()[0];
        assert_eq!((e.pitch, e.channel, e.voice), (43, 5, VoiceTag::GuitarString(6)));
        assert_eq!(e.duration(), Some(0.5));
    }

    #[test]
    fn rushing_moves_earlier() {
        let model = ErrorModel {
            tempo_drift_beats: 0.01,
            ..Default::default()
        };
        let s = generate(&eighths(10), &model).unwrap();
        let rows = group_rows(&build_records(&s, &GridConfig::default()));
        assert!((rows[9].mean_deviation().unwrap() + 0.09).abs() < 1e-9);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = eighths(1);
        spec.slots[0].index = 8;
        assert!(generate(&spec, &ErrorModel::default()).is_err());
        let model = ErrorModel {
            ghost_note_prob: 1.0,
            ..Default::default()
        };
        assert!(generate(&eighths(1), &model).is_err());
        let model = ErrorModel {
            jitter_std_beats: -1.0,
            ..Default::default()
        };
        assert!(generate(&eighths(1), &model).is_err());
    }
}

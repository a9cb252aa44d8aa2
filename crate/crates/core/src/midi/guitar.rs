use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NoteEvent, VoiceTag};

/// Open-string pitches of standard tuning, string 1 (high E) first.
pub const STANDARD_TUNING: [u8; 6] = [64, 59, 55, 50, 45, 40];

/// Guitar tuning: open pitch per string (index 0 is string 1, the highest)
/// and the number of frets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Tuning {
    pub open: [u8; 6],
    #[serde(default = "default_max_fret")]
    pub max_fret: u8,
}

fn default_max_fret() -> u8 {
    22
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            open: STANDARD_TUNING,
            max_fret: default_max_fret(),
        }
    }
}

impl Tuning {
    pub fn open_pitch(&self, string: u8) -> Option<u8> {
        if (1..=6).contains(&string) {
            Some(self.open[string as usize - 1])
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(12..=30).contains(&self.max_fret) {
            return Err(format!("max_fret {} outside 12..=30", self.max_fret));
        }
        if let Some(p) = self.open.iter().find(|&&p| p > 127) {
            return Err(format!("open pitch {p} is not a MIDI note"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FretError {
    #[error("note is not tagged with a guitar string")]
    NotGuitar,
    #[error("string {0} does not exist")]
    NoSuchString(u8),
    #[error("pitch {pitch} is below the open pitch {open} of string {string}")]
    BelowOpenString { string: u8, pitch: u8, open: u8 },
    #[error("fret {fret} on string {string} is above the last fret {max_fret}")]
    AboveFretboard { string: u8, fret: u8, max_fret: u8 },
}

/// Recovers the (string, fret) a note was played at from its string tag.
pub fn derive_string_fret(event: &NoteEvent, tuning: &Tuning) -> Result<(u8, u8), FretError> {
    let string = match event.voice {
        VoiceTag::GuitarString(s) => s,
        _ => return Err(FretError::NotGuitar),
    };
    let open = tuning
        .open_pitch(string)
        .ok_or(FretError::NoSuchString(string))?;
    if event.pitch < open {
        return Err(FretError::BelowOpenString {
            string,
            pitch: event.pitch,
            open,
        });
    }
    let fret = event.pitch - open;
    if fret > tuning.max_fret {
        return Err(FretError::AboveFretboard {
            string,
            fret,
            max_fret: tuning.max_fret,
        });
    }
    Ok((string, fret))
}

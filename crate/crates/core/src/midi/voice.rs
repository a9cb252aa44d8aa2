use std::collections::BTreeMap;

use super::{DrumVoice, VoiceTag};

/// General MIDI percussion keys grouped into the drum kinds the timing view
/// separates. Keys not listed here classify as [`DrumVoice::Other`].
const GM_PERCUSSION: &[(u8, DrumVoice)] = &[
    (35, DrumVoice::Kick),   // acoustic bass drum
    (36, DrumVoice::Kick),   // bass drum 1
    (37, DrumVoice::Snare),  // side stick
    (38, DrumVoice::Snare),  // acoustic snare
    (40, DrumVoice::Snare),  // electric snare
    (41, DrumVoice::Tom),    // low floor tom
    (42, DrumVoice::HiHat),  // closed hi-hat
    (43, DrumVoice::Tom),    // high floor tom
    (44, DrumVoice::HiHat),  // pedal hi-hat
    (45, DrumVoice::Tom),    // low tom
    (46, DrumVoice::HiHat),  // open hi-hat
    (47, DrumVoice::Tom),    // low-mid tom
    (48, DrumVoice::Tom),    // hi-mid tom
    (49, DrumVoice::Cymbal), // crash 1
    (50, DrumVoice::Tom),    // high tom
    (51, DrumVoice::Cymbal), // ride 1
    (52, DrumVoice::Cymbal), // chinese
    (53, DrumVoice::Cymbal), // ride bell
    (55, DrumVoice::Cymbal), // splash
    (57, DrumVoice::Cymbal), // crash 2
    (59, DrumVoice::Cymbal), // ride 2
];

/// Pitch to drum-kind table. Starts from General MIDI and accepts per-key
/// overrides for kits that map pads differently.
#[derive(Debug, Clone, PartialEq)]
pub struct DrumMap {
    table: [DrumVoice; 128],
}

impl Default for DrumMap {
    fn default() -> Self {
        let mut table = [DrumVoice::Other; 128];
        for &(key, voice) in GM_PERCUSSION {
            table[key as usize] = voice;
        }
        DrumMap { table }
    }
}

impl DrumMap {
    pub fn with_overrides(overrides: &BTreeMap<u8, DrumVoice>) -> Self {
        let mut map = DrumMap::default();
        for (&key, &voice) in overrides {
            if let Some(slot) = map.table.get_mut(key as usize) {
                *slot = voice;
            }
        }
        map
    }

    pub fn classify(&self, pitch: u8) -> DrumVoice {
        self.table
            .get(pitch as usize)
            .copied()
            .unwrap_or(DrumVoice::Other)
    }
}

/// Classifies a percussion key with the stock General MIDI table.
pub fn classify_drum(pitch: u8) -> DrumVoice {
    DrumMap::default().classify(pitch)
}

/// Decides which voice a (channel, pitch) pair belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceMap {
    drum_channels: u16,
    /// `strings[ch]` is the guitar string carried by MIDI channel `ch`.
    strings: [Option<u8>; 16],
    drums: DrumMap,
}

impl Default for VoiceMap {
    /// Channel 10 (index 9) carries drums, everything else is keyboard.
    fn default() -> Self {
        VoiceMap {
            drum_channels: 1 << 9,
            strings: [None; 16],
            drums: DrumMap::default(),
        }
    }
}

impl VoiceMap {
    pub fn new(drum_channels: &[u8], drums: DrumMap) -> Self {
        let mut bits = 0u16;
        for &ch in drum_channels {
            if ch < 16 {
                bits |= 1 << ch;
            }
        }
        VoiceMap {
            drum_channels: bits,
            strings: [None; 16],
            drums,
        }
    }

    /// Assigns `channels[i]` to guitar string `i + 1`.
    pub fn with_guitar_channels(mut self, channels: [u8; 6]) -> Self {
        self.strings = [None; 16];
        for (i, &ch) in channels.iter().enumerate() {
            if ch < 16 {
                self.strings[ch as usize] = Some(i as u8 + 1);
                self.drum_channels &= !(1 << ch);
            }
        }
        self
    }

    /// Mono-mode MIDI guitar pickups: channels 0-5 carry strings 1-6.
    pub fn guitar_default() -> Self {
        VoiceMap::default().with_guitar_channels([0, 1, 2, 3, 4, 5])
    }

    /// Channel assigned to a guitar string, if any.
    pub fn channel_for_string(&self, string: u8) -> Option<u8> {
        self.strings
            .iter()
            .position(|s| *s == Some(string))
            .map(|c| c as u8)
    }

    pub fn tag(&self, channel: u8, pitch: u8) -> VoiceTag {
        let ch = (channel & 0x0f) as usize;
        if let Some(string) = self.strings[ch] {
            VoiceTag::GuitarString(string)
        } else if self.drum_channels & (1 << ch) != 0 {
            VoiceTag::Drum(self.drums.classify(pitch))
        } else {
            VoiceTag::Keyboard
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gm_examples() {
        assert_eq!(classify_drum(36), DrumVoice::Kick);
        assert_eq!(classify_drum(38), DrumVoice::Snare);
        // triangle
        assert_eq!(classify_drum(81), DrumVoice::Other);
        assert_eq!(classify_drum(42), DrumVoice::HiHat);
        assert_eq!(classify_drum(49), DrumVoice::Cymbal);
        assert_eq!(classify_drum(48), DrumVoice::Tom);
    }

    #[test]
    fn total_over_all_keys() {
        let map = DrumMap::default();
        for p in 0..=127u8 {
            let v = map.classify(p);
            assert!(DrumVoice::ALL.contains(&v));
        }
        // out-of-range keys still map somewhere
        assert_eq!(map.classify(200), DrumVoice::Other);
    }

    #[test]
    fn overrides_replace_entries() {
        let mut o = BTreeMap::new();
        o.insert(81, DrumVoice::Cymbal);
        o.insert(36, DrumVoice::Tom);
        let map = DrumMap::with_overrides(&o);
        assert_eq!(map.classify(81), DrumVoice::Cymbal);
        assert_eq!(map.classify(36), DrumVoice::Tom);
        assert_eq!(map.classify(38), DrumVoice::Snare);
    }

    #[test]
    fn voice_map_routes_channels() {
        let m = VoiceMap::default();
        assert_eq!(m.tag(9, 36), VoiceTag::Drum(DrumVoice::Kick));
        assert_eq!(m.tag(0, 36), VoiceTag::Keyboard);
        let g = VoiceMap::guitar_default();
        assert_eq!(g.tag(0, 64), VoiceTag::GuitarString(1));
        assert_eq!(g.tag(5, 40), VoiceTag::GuitarString(6));
        assert_eq!(g.tag(9, 38), VoiceTag::Drum(DrumVoice::Snare));
        assert_eq!(g.channel_for_string(3), Some(2));
    }
}

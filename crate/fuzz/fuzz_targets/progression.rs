#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::harmony::ChordProgression;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut parts = text.splitn(3, '\n');
    let key = parts.next().unwrap_or("");
    let mode = parts.next().unwrap_or("");
    let chords = parts.next().unwrap_or("");
    if let Ok(p) = ChordProgression::parse(key, mode, chords, &[]) {
        for bar in 0..p.bars.len() {
            std::hint::black_box(p.scale_for(bar));
        }
    }
});

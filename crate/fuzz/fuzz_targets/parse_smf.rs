#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::midi::{parse_smf_with, write_smf, VoiceMap, WriteOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_smf_with(data, &VoiceMap::default()) else {
        return;
    };
    for note in parsed.stream.events() {
        assert!(note.onset >= 0.0);
        assert!(note.release.map_or(true, |r| r >= note.onset));
    }
    // Whatever parses must survive a write and re-read.
    let bytes = write_smf(&parsed.stream, &WriteOptions::default());
    parse_smf_with(&bytes, &VoiceMap::default()).expect("written file parses");
});

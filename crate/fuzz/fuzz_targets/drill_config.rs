#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::DrillConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for parsed in [DrillConfig::from_toml_str(text), DrillConfig::from_json_str(text)] {
        if let Ok(config) = parsed {
            let again = DrillConfig::from_toml_str(&config.to_toml_string()).expect("reparse");
            assert_eq!(again.kind, config.kind);
            let _ = config.chord_progression();
            let _ = config.voice_map();
        }
    }
});

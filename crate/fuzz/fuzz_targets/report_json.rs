#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::Report;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = Report::from_json(text) {
        let _ = Report::from_json(&report.to_json());
    }
});

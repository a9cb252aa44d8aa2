#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::session::Session;
use practice_core::{DrillConfig, DrillKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut session = Session::new(DrillConfig::new(DrillKind::Timing), 0.0);
    let mut now = 0.0;
    for line in text.lines() {
        now += 0.05;
        for frame in session.handle_line(line, now) {
            std::hint::black_box(frame.to_line());
        }
        session.tick(now);
    }
});

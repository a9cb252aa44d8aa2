#![no_main]

use libfuzzer_sys::fuzz_target;
use practice_core::rhythm::DurationSymbol;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(symbol) = text.parse::<DurationSymbol>() {
        let shown = symbol.to_string();
        let again: DurationSymbol = shown.parse().expect("display reparses");
        assert_eq!(again.beats(), symbol.beats());
    }
});

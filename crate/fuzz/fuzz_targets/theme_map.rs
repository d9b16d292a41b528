#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::topicmodel::parse_theme_map;

fuzz_target!(|data: &[u8]| {
    // First byte picks k so out-of-range topic ids are exercised too.
    if let Some((&k, rest)) = data.split_first() {
        if let Ok(text) = std::str::from_utf8(rest) {
            let _ = parse_theme_map(text, k as usize % 32);
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::tagging::parse_lexicons;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_lexicons(text);
    }
});

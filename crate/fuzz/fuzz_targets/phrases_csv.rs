#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::corpus::PhraseTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PhraseTable::read_csv(text);
    }
});

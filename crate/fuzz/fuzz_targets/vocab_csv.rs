#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::corpus::Vocabulary;

fuzz_target!(|data: &[u8]| {
    let _ = Vocabulary::read_csv(data);
});

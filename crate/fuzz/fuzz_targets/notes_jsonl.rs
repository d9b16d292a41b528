#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::corpus::read_notes_jsonl;

fuzz_target!(|data: &[u8]| {
    let _ = read_notes_jsonl(data);
});

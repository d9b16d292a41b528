#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::corpus::read_corpus_jsonl;

fuzz_target!(|data: &[u8]| {
    let _ = read_corpus_jsonl(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::embedding::EmbeddingModel;

fuzz_target!(|data: &[u8]| {
    let _ = EmbeddingModel::read_text(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::classify::TrainedModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = TrainedModel::from_json(text) {
            let _ = model.to_json();
        }
    }
});

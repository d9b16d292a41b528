#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::features::FeatureTable;

fuzz_target!(|data: &[u8]| {
    let _ = FeatureTable::read_csv(data);
});

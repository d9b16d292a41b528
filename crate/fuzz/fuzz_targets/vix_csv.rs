#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::features::VixSeries;

fuzz_target!(|data: &[u8]| {
    let _ = VixSeries::read_csv(data);
});

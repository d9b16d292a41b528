#![no_main]

use libfuzzer_sys::fuzz_target;
use notesforge::features::read_transactions;

fuzz_target!(|data: &[u8]| {
    let _ = read_transactions(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tunemag::hysteresis::{identify_from_forc, ForcTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = ForcTable::read_csv(data) {
        let _ = identify_from_forc(&table, 11);
    }
});

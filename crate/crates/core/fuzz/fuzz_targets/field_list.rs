#![no_main]

use libfuzzer_sys::fuzz_target;
use tunemag::hysteresis::parse_field_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_field_list(text);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tunemag::hysteresis::{HysteresisModel, MemoryStack, Polarity};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = HysteresisModel::from_toml(text) {
        let _ = model.evaluate(&MemoryStack::saturated(Polarity::Positive), 0.0);
        let again = HysteresisModel::from_toml(&model.to_toml()).expect("rendered model parses");
        assert_eq!(again, model);
    }
});

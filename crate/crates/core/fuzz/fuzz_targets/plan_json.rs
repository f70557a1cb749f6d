#![no_main]

use libfuzzer_sys::fuzz_target;
use tunemag::tuning::TuningPlan;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = TuningPlan::from_json(text) {
        let _ = plan.validate(5e5);
        let _ = plan.max_field();
    }
});

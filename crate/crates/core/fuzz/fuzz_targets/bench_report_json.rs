#![no_main]

use libfuzzer_sys::fuzz_target;
use tunemag::bench::{emit_report, ComparisonReport, ReportFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = ComparisonReport::from_json(text) {
        let _ = emit_report(&report, ReportFormat::Table);
        let _ = emit_report(&report, ReportFormat::Csv);
    }
});

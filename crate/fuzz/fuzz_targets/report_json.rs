#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::evaluation::{evaluate, labels_from_report};
use vigil::pipeline::VideoReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = VideoReport::from_json_str(text) {
        // Self-labels can still be rejected when recorded counts are inconsistent.
        if let Ok(m) = evaluate(&report, &labels_from_report(&report)) {
            for row in &m.rows {
                assert!(row.accuracy.is_none_or(|a| (0.0..=1.0).contains(&a)));
            }
        }
    }
});

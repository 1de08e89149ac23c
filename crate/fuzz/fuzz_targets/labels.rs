#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::evaluation::GroundTruthLabels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(labels) = GroundTruthLabels::from_json_str(text) {
        for f in labels.frames.values() {
            assert!(f.violators <= f.people && f.masked <= f.faces);
        }
        let again = GroundTruthLabels::from_json_str(&labels.to_json_pretty()).unwrap();
        assert_eq!(again, labels);
    }
});

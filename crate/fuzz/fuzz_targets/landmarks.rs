#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::augmentation::{mask_fit, LandmarkSet};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lm) = LandmarkSet::from_json_str(text) {
        // Any validated landmark set either fits or is reported degenerate.
        if let Ok(p) = mask_fit(&lm) {
            assert!(p.rotation_deg.is_finite());
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::backends::SyntheticScript;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(script) = SyntheticScript::from_json_str(text) {
        for (idx, frame) in script.frames() {
            for (i, face) in frame.faces.iter().enumerate() {
                assert!((0.0..=1.0).contains(&face.mask_prob));
                assert_eq!(script.mask_prob(idx, i), Some(face.mask_prob));
            }
            for p in script.persons(idx, 0.5, 2.0) {
                assert!((0.0..=1.0).contains(&p.confidence));
            }
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::backends::GraphManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = GraphManifest::from_json_str(text) {
        assert!(!m.outputs.is_empty() && !m.input_size.contains(&0));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::pipeline::{sample_indices, VideoManifest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = VideoManifest::from_json_str(text) {
        assert!(m.fps > 0.0);
        let n = m.frames.len() as u64;
        assert_eq!(sample_indices(n, 5).len() as u64, n.div_ceil(5));
    }
});

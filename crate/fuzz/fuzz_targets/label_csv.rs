#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::augmentation::dataset::{read_manifest, write_manifest};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_manifest(data) {
        assert!(rows.iter().all(|r| r.label <= 1 && !r.path.is_empty()));
        let mut buf = Vec::new();
        write_manifest(&mut buf, &rows).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), rows);
    }
});

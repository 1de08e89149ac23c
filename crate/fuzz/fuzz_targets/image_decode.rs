#![no_main]

use libfuzzer_sys::fuzz_target;
use vigil::image_io::{decode, encode, Encoding};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode(data) {
        if img.width() as u64 * img.height() as u64 > 1 << 20 {
            return;
        }
        let png = encode(&img, Encoding::Png).unwrap();
        assert_eq!(decode(&png).unwrap(), img);
    }
});

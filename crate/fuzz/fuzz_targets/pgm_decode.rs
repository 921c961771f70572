#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnav::imaging::{read_pgm, write_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = read_pgm(data) {
        assert_eq!(img.data.len(), img.width * img.height);
        let mut out = Vec::new();
        write_pgm(&img, &mut out).expect("re-encode");
        let again = read_pgm(&out).expect("decode re-encoded image");
        assert_eq!((again.width, again.height), (img.width, img.height));
    }
});

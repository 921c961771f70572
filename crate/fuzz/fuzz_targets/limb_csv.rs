#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnav::imaging::{read_limb_csv, write_limb_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(limb) = read_limb_csv(data) {
        assert!(limb.points.iter().flatten().all(|x| x.is_finite()));
        let mut out = Vec::new();
        write_limb_csv(&limb, &mut out).expect("re-encode");
        assert_eq!(read_limb_csv(out.as_slice()).expect("decode re-encoded limb"), limb);
    }
});

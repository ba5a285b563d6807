#![no_main]

use libfuzzer_sys::fuzz_target;
use trunc_ising::model::{format_samples, parse_samples};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(samples) = parse_samples(text) {
        assert_eq!(parse_samples(&format_samples(&samples)).unwrap(), samples);
    }
});

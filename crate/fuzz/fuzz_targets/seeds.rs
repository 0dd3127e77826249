#![no_main]
use dipt::graph::{parse_seeds, write_seeds};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_seeds(text) {
        assert_eq!(parse_seeds(&write_seeds(&v)).expect("round trip"), v);
    }
});

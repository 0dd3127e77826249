#![no_main]
use dipt::graph::{parse_forest, write_forest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_forest(text) {
        assert_eq!(parse_forest(&write_forest(&v)).expect("round trip"), v);
    }
});

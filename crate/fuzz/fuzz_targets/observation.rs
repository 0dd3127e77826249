#![no_main]
use dipt::graph::{parse_observation, write_observation};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_observation(text) {
        assert_eq!(parse_observation(&write_observation(&v)).expect("round trip"), v);
    }
});

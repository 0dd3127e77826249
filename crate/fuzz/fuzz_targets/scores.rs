#![no_main]
use dipt::graph::{parse_scores, write_scores};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_scores(text) {
        let again = parse_scores(&write_scores(&v)).expect("round trip");
        assert!(v.iter().zip(&again).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
    }
});

#![no_main]
use dipt::checkpoint::{parse_checkpoint, write_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_checkpoint(text) {
        let again = parse_checkpoint(&write_checkpoint(&model)).expect("written checkpoint parses");
        assert_eq!(write_checkpoint(&again), write_checkpoint(&model));
    }
});

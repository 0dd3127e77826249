#![no_main]
use dipt_cli::dataset::InstanceRange;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = text.parse::<InstanceRange>() {
        assert_eq!(r.to_string().parse::<InstanceRange>().expect("round trip"), r);
    }
});

#![no_main]
use dipt_cli::params::{EvalParams, GradcheckParams, InferParams, SimIdssParams, SimSiParams, TrainParams};
use libfuzzer_sys::fuzz_target;

// Config files for every command, followed by the checks a run performs
// before touching any data.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = toml::from_str::<SimSiParams>(text) {
        let _ = p.validate();
    }
    if let Ok(p) = toml::from_str::<SimIdssParams>(text) {
        let _ = p.idss_config(p.rng_seed).validate();
    }
    if let Ok(p) = toml::from_str::<TrainParams>(text) {
        let _ = p.train_config().validate();
    }
    if let Ok(p) = toml::from_str::<InferParams>(text) {
        let _ = p.inference_config().validate();
    }
    if let Ok(p) = toml::from_str::<GradcheckParams>(text) {
        let _ = p.config().validate();
    }
    let _ = toml::from_str::<EvalParams>(text);
});

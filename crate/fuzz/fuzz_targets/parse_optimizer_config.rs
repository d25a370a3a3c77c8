#![no_main]

use erdos_sep::optimizer::OptimizerConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = OptimizerConfig::from_json_str(text) {
        assert!(config.validate().is_ok());
    }
});

#![no_main]

use erdos_sep::profile::CoefficientSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = CoefficientSpec::from_json_str(text) {
        let again = serde_json::to_string(&spec).unwrap();
        assert_eq!(CoefficientSpec::from_json_str(&again).unwrap(), spec);
        let _ = spec.curve().h(1.0);
    }
});

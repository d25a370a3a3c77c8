#![no_main]

use erdos_sep::manifest::RunManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RunManifest::from_json_str(text) {
        let again = m.to_json_pretty().unwrap();
        assert_eq!(RunManifest::from_json_str(&again).unwrap(), m);
    }
});

#![no_main]

use erdos_sep::singer::DifferenceSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = DifferenceSet::from_json_str(text) {
        let report = set.verify();
        if report.valid {
            assert!(set.separation_index().is_ok());
        }
    }
});

#![no_main]

use erdos_sep::embedding::{verify_separation, PairwiseDistances};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dists) = PairwiseDistances::read_csv(data) {
        let report = verify_separation(&dists, 1e-9);
        assert_eq!(report.entries, dists.len());
    }
});

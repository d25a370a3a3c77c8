#![no_main]

use erdos_sep::embedding::PointTable;
use erdos_sep::singer::build_separation_index;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = PointTable::read_csv(data) {
        if let Ok(index) = build_separation_index(&table.labels, table.m) {
            let _ = table.distances(&index);
        }
    }
});

//! Runs the checked-in fuzz corpus through the same parser entry points as
//! the cargo-fuzz targets, plus random inputs via proptest.

use std::fs;
use std::path::PathBuf;

use erdos_sep::embedding::{verify_separation, PairwiseDistances, PointTable};
use erdos_sep::manifest::RunManifest;
use erdos_sep::optimizer::OptimizerConfig;
use erdos_sep::profile::CoefficientSpec;
use erdos_sep::singer::{build_separation_index, DifferenceSet};
use proptest::prelude::*;

fn coefficient_spec(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match CoefficientSpec::from_json_str(text) {
        Ok(spec) => {
            let again = serde_json::to_string(&spec).unwrap();
            assert_eq!(CoefficientSpec::from_json_str(&again).unwrap(), spec);
            true
        }
        Err(_) => false,
    }
}

fn optimizer_config(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    OptimizerConfig::from_json_str(text).is_ok()
}

fn difference_set(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match DifferenceSet::from_json_str(text) {
        Ok(set) => {
            if set.verify().valid {
                assert!(set.separation_index().is_ok());
            }
            true
        }
        Err(_) => false,
    }
}

fn distances_csv(data: &[u8]) -> bool {
    match PairwiseDistances::read_csv(data) {
        Ok(d) => {
            assert_eq!(verify_separation(&d, 1e-9).entries, d.len());
            true
        }
        Err(_) => false,
    }
}

fn points_csv(data: &[u8]) -> bool {
    match PointTable::read_csv(data) {
        Ok(table) => {
            if let Ok(index) = build_separation_index(&table.labels, table.m) {
                let _ = table.distances(&index);
            }
            true
        }
        Err(_) => false,
    }
}

fn manifest(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match RunManifest::from_json_str(text) {
        Ok(m) => {
            assert_eq!(RunManifest::from_json_str(&m.to_json_pretty().unwrap()).unwrap(), m);
            true
        }
        Err(_) => false,
    }
}

type Entry = fn(&[u8]) -> bool;

const TARGETS: [(&str, Entry); 6] = [
    ("parse_coefficient_spec", coefficient_spec),
    ("parse_optimizer_config", optimizer_config),
    ("parse_difference_set", difference_set),
    ("parse_distances_csv", distances_csv),
    ("parse_points_csv", points_csv),
    ("parse_manifest", manifest),
];

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target)
}

#[test]
fn corpus_seeds_parse_as_expected() {
    // malformed seeds; everything else must parse (even if it later fails
    // verification, like `not_perfect` or `collision`)
    let rejected = ["even_key", "duplicate", "huge", "nan", "bad_path"];
    for (target, entry) in TARGETS {
        let dir = corpus_dir(target);
        let mut seen = 0;
        for file in fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            let path = file.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            let accepted = entry(&fs::read(&path).unwrap());
            assert_eq!(accepted, !rejected.contains(&name.as_str()), "{target}/{name}");
            seen += 1;
        }
        assert!(seen >= 3, "{target} has only {seen} seeds");
    }
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(data in proptest::collection::vec(any::<u8>(), 0..256)) {
        for (_, entry) in TARGETS {
            entry(&data);
        }
    }

    #[test]
    fn json_shaped_text_never_panics(
        q in 0u64..100,
        m in 0u64..20000,
        elems in proptest::collection::vec(0u64..50, 0..8),
        eps in -2.0f64..2.0,
        key in 0u64..20,
    ) {
        let set = format!(r#"{{"q":{q},"m":{m},"n":{},"elements":{elems:?}}}"#, elems.len());
        difference_set(set.as_bytes());
        let spec = format!(r#"{{"epsilon":{eps},"overrides":{{"{key}":{eps}}}}}"#);
        coefficient_spec(spec.as_bytes());
        let table = format!("# q={q} m={m} n={} scale=1\nt,x1\n{}", elems.len(),
            elems.iter().map(|e| format!("{e},{eps}\n")).collect::<String>());
        points_csv(table.as_bytes());
    }
}

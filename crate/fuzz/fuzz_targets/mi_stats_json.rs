#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::qubo::{build_mi_qubo, MiQuboWeights};
use mifs_core::MiStatistics;

fuzz_target!(|text: &str| {
    if let Ok(mi) = MiStatistics::from_json(text) {
        assert_eq!(MiStatistics::from_json(&mi.to_json()).unwrap(), mi);
        let q = build_mi_qubo(&mi, MiQuboWeights::default());
        assert_eq!(q.n(), mi.n());
    }
});

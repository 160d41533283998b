#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::qubo::{QuboProblem, SubsetVector};

fuzz_target!(|text: &str| {
    let Ok(q) = QuboProblem::from_json(text) else {
        return;
    };
    let again = QuboProblem::from_json(&q.to_json()).expect("serialized QUBO reparses");
    assert_eq!(q, again);
    if q.n() <= 64 {
        let x = SubsetVector::zeros(q.n());
        assert_eq!(q.energy(&x).unwrap(), 0.0);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::SolverResult;

fuzz_target!(|text: &str| {
    if let Ok(r) = SolverResult::from_json(text) {
        let again = SolverResult::from_json(&r.to_json()).expect("serialized result reparses");
        assert_eq!(r.best, again.best);
        assert_eq!(r.samples.len(), again.samples.len());
    }
});

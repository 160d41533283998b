#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::evaluation::{from_csv, markdown, timing_csv, to_csv};

fuzz_target!(|text: &str| {
    if let Ok(rows) = from_csv(text) {
        let _ = markdown(&rows);
        let _ = timing_csv(&rows);
        let csv = to_csv(&rows).expect("parsed rows serialize");
        assert_eq!(from_csv(&csv).expect("serialized rows reparse"), rows);
    }
});

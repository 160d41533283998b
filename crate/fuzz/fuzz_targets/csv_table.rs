#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::dataset::{clean, load_csv_from_reader};
use mifs_core::{LabelColumn, LoadOptions};

fuzz_target!(|data: &[u8]| {
    let opts = LoadOptions::default();
    for label in [LabelColumn::Index(0), LabelColumn::Name("defective".into())] {
        if let Ok(raw) = load_csv_from_reader(data, &label, &opts) {
            // cleaning must either succeed or report why, never panic
            if let Ok(d) = clean(&raw) {
                assert_eq!(d.x().len(), d.y().len());
                assert!(d.x().iter().flatten().all(|v| v.is_finite()));
            }
        }
    }
});

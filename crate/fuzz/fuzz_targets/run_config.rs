#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use mifs_core::config::RunConfig;

fuzz_target!(|text: &str| {
    if let Ok(c) = RunConfig::from_toml(text) {
        let _ = c.diagnostics(Path::new("/nonexistent"));
        let again = RunConfig::from_toml(&c.to_toml()).expect("serialized config reparses");
        assert_eq!(c.seed, again.seed);
        assert_eq!(c.solvers.len(), again.solvers.len());
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use mifs_core::remote::{JobResponse, RemoteJob, SubmitRequest, SubmitResponse};

fuzz_target!(|text: &str| {
    if let Ok(r) = serde_json::from_str::<JobResponse>(text) {
        let _ = RemoteJob::try_from(r);
    }
    let _ = serde_json::from_str::<SubmitResponse>(text);
    let _ = serde_json::from_str::<SubmitRequest>(text);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use zipsel::cli::RunManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RunManifest::from_json(text) {
        let again = serde_json::to_string(&m).unwrap();
        let _ = RunManifest::from_json(&again).unwrap();
    }
});

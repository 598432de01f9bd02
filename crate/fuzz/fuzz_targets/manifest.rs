#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(m) = airgnn_cli::RunManifest::from_json(text) {
        assert_eq!(airgnn_cli::RunManifest::from_json(&m.to_json()).expect("printed manifest parses"), m);
    }
});

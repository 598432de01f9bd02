#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(c) = airgnn::io::Checkpoint::from_json(text) {
        let _ = airgnn::io::Checkpoint::from_json(&c.to_json());
    }
});

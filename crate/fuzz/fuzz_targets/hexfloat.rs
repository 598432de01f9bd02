#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(v) = airgnn::io::parse_hex(text) {
        let back = airgnn::io::parse_hex(&airgnn::io::format_hex(v)).expect("formatted value parses");
        assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }
});

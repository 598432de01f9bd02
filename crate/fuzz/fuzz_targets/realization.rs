#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(r) = airgnn::io::decode_realization(bytes) {
        let once = airgnn::io::encode_realization(&r);
        let twice = airgnn::io::encode_realization(&airgnn::io::decode_realization(&once).expect("encoded value decodes"));
        assert_eq!(once, twice);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(d) = airgnn::io::decode_dataset(bytes) {
        let once = airgnn::io::encode_dataset(&d);
        let twice = airgnn::io::encode_dataset(&airgnn::io::decode_dataset(&once).expect("encoded value decodes"));
        assert_eq!(once, twice);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = airgnn_cli::config::parse_pairs(text);
    if let Ok(cfg) = airgnn_cli::ExperimentConfig::from_text(text) {
        let again = airgnn_cli::ExperimentConfig::from_text(&cfg.to_text()).expect("resolved config parses");
        assert_eq!(again.to_text(), cfg.to_text());
    }
});

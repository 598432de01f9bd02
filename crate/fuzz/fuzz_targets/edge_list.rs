#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(s) = airgnn::graphs::GraphShiftOperator::parse_edge_list(text) {
        let again = airgnn::graphs::GraphShiftOperator::parse_edge_list(&s.to_edge_list()).expect("printed edge list parses");
        assert_eq!(again.nnz(), s.nnz());
    }
});

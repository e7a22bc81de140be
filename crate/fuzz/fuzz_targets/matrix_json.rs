#![no_main]

use libfuzzer_sys::fuzz_target;
use weakstat::config::{parse_matrix_json, MatrixJson};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix_json(text) {
        assert!(m.is_square());
        let back = MatrixJson::from_matrix(&m).to_matrix().expect("re-encoded matrix parses");
        assert_eq!(back, m);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_matrix_units, write_matrix_units};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_matrix_units(text) {
        let written = write_matrix_units(&v);
        assert_eq!(parse_matrix_units(&written).expect("written output re-parses"), v);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_row_function, write_row_function};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_row_function(text) {
        let written = write_row_function(&v);
        assert_eq!(parse_row_function(&written).expect("written output re-parses"), v);
    }
});

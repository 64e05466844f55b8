#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_partial_injection, write_partial_injection};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_partial_injection(text) {
        let written = write_partial_injection(&v);
        assert_eq!(parse_partial_injection(&written).expect("written output re-parses"), v);
    }
});

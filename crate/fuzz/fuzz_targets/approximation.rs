#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_approximation, write_approximation};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_approximation(text) {
        let written = write_approximation(&v);
        assert_eq!(parse_approximation(&written).expect("written output re-parses"), v);
    }
});

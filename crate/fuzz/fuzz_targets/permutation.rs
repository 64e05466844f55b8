#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_permutation, write_permutation};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_permutation(text) {
        let written = write_permutation(&v);
        assert_eq!(parse_permutation(&written).expect("written output re-parses"), v);
    }
});

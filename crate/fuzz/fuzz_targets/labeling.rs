#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_labeling, write_labeling};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_labeling(text) {
        let written = write_labeling(&v);
        assert_eq!(parse_labeling(&written).expect("written output re-parses"), v);
    }
});

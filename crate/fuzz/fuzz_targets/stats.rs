#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab::io::{parse_stats, write_stats};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_stats(text) {
        let written = write_stats(&s);
        let again = parse_stats(&written).expect("written stats re-parse");
        assert_eq!(again, s);
        assert_eq!(write_stats(&again), written);
    }
});

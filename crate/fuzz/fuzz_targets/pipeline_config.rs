#![no_main]

use libfuzzer_sys::fuzz_target;
use soficlab_cli::pipeline::PipelineConfig;

// Parsing and validation only; running a config would build the artifacts.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PipelineConfig::parse(text);
    }
});

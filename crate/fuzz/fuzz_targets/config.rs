#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use maxsurf::config::{parse_config, Overrides};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_config(text, Path::new("/nonexistent"), &Overrides::default());
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use maxsurf::expr::parse_expression;
use num_complex::Complex64;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_expression(text) {
        // literals that overflow print as inf and do not parse back
        if let Ok(again) = parse_expression(&e.to_string()) {
            assert_eq!(again, e);
        }
        let _ = e.eval(Complex64::new(0.25, -0.5));
    }
});

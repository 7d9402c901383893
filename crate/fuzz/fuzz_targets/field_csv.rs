#![no_main]

use libfuzzer_sys::fuzz_target;
use maxsurf::complex_grid::ComplexField;

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = ComplexField::from_csv(data) {
        let mut out = Vec::new();
        field.to_csv(&mut out).expect("write to memory");
        let back = ComplexField::from_csv(out.as_slice()).expect("written csv parses");
        assert_eq!((back.grid().nu, back.grid().nv), (field.grid().nu, field.grid().nv));
        assert_eq!(back.samples(), field.samples());
    }
});

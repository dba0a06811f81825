#![no_main]

use et_lab::polynomials::PolynomialSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = PolynomialSpec::from_json(text) {
        let again = PolynomialSpec::from_json(&f.to_json().to_string()).expect("round trip");
        assert_eq!(again, f);
    }
});

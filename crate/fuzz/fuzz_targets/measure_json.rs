#![no_main]

use et_lab::measures::Measure;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Measure::from_json(text) {
        let again = Measure::from_json(&m.to_json().to_string());
        assert!(again.is_ok(), "serialized measure failed to parse");
    }
});

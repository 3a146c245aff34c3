#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(bundle) = mispro::bundle::ModelBundle::from_json(text) {
            let _ = bundle.to_json();
        }
    }
});

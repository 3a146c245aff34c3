#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = mispro::features::parse_feature_table(text) {
            let _ = mispro::features::write_feature_table(&rows);
        }
    }
});

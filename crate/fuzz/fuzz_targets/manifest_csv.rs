#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = mispro::corpus::CorpusManifest::from_csv(text, "/fuzz") {
            let again =
                mispro::corpus::CorpusManifest::from_csv(&m.to_csv(), "/fuzz").expect("written manifests parse");
            assert_eq!(again.entries, m.entries);
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = mispro::config::PipelineConfig::from_text(text) {
            let again = mispro::config::PipelineConfig::from_text(&cfg.to_text()).expect("written configs parse");
            assert_eq!(again, cfg);
        }
    }
});

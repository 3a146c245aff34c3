#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = mispro::audio::decode_wav(data) {
        assert!(clip.samples().iter().all(|v| v.is_finite()));
    }
});

use std::collections::{BTreeMap, BTreeSet};

use mispro::audio::{decode_wav, encode_wav, load_wav, write_wav, AudioClip, PcmFormat};
use mispro::corpus::{kfold, scan_corpus, stratified_split, CorpusManifest, ManifestEntry, Origin, SplitPlan};
use mispro::synth::{synth_corpus, SynthParams};
use proptest::prelude::*;

fn manifest(classes: usize, takes: usize) -> CorpusManifest {
    let mut entries = Vec::new();
    for c in 0..classes {
        for t in 0..takes {
            let label = format!("class_{c:02}");
            let stem = format!("spk{:02}_take{t:02}", t % 3);
            entries.push(ManifestEntry {
                path: format!("{label}/{stem}.wav"),
                group: format!("{label}/{stem}"),
                speaker: format!("spk{:02}", t % 3),
                label,
                origin: Origin::Original,
            });
        }
    }
    CorpusManifest::new("/nonexistent", entries).unwrap()
}

#[test]
fn wav_formats_round_trip_within_quantization() {
    let samples: Vec<f64> = (0..2000).map(|i| ((i as f64) * 0.013).sin() * 0.9).collect();
    let clip = AudioClip::new(samples, 16000).unwrap();
    for (format, tol) in [
        (PcmFormat::Int16, 2f64.powi(-15)),
        (PcmFormat::Int24, 2f64.powi(-22)),
        (PcmFormat::Float32, 1e-7),
    ] {
        let back = decode_wav(&encode_wav(&clip, format).unwrap()).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        assert_eq!(back.len(), clip.len());
        let err = back
            .samples()
            .iter()
            .zip(clip.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= tol, "{format:?}: {err}");
    }
}

#[test]
fn stereo_files_are_downmixed_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("st.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 8000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&path, spec).unwrap();
    for _ in 0..100 {
        w.write_sample(16384i16).unwrap();
        w.write_sample(0i16).unwrap();
    }
    w.finalize().unwrap();
    let clip = load_wav(&path).unwrap();
    assert_eq!(clip.len(), 100);
    assert!(clip.samples().iter().all(|v| (v - 0.25).abs() < 1e-12));
}

#[test]
fn missing_and_corrupt_files_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(load_wav(dir.path().join("nope.wav")).unwrap_err().code(), "io_error");
    let bad = dir.path().join("bad.wav");
    std::fs::write(&bad, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
    assert_eq!(load_wav(&bad).unwrap_err().code(), "decode_error");
}

#[test]
fn scan_sees_every_synthetic_take() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams {
        classes: 4,
        takes: 5,
        seed: 42,
    };
    synth_corpus(dir.path(), &params).unwrap();
    let m = scan_corpus(dir.path()).unwrap();
    assert_eq!(m.len(), 20);
    assert_eq!(m.labels().len(), 4);
    assert!(m.entries.iter().all(|e| e.origin == Origin::Original));
    assert!(m.entries.iter().all(|e| e.group.starts_with(&format!("{}/", e.label))));
    let clip = load_wav(m.resolve(&m.entries[0])).unwrap();
    assert_eq!(clip.sample_rate(), 22050);
}

#[test]
fn augmented_files_keep_their_source_group() {
    let dir = tempfile::tempdir().unwrap();
    let class = dir.path().join("class_00");
    std::fs::create_dir_all(&class).unwrap();
    let clip = AudioClip::new(vec![0.1; 500], 8000).unwrap();
    for name in ["spk01_take01.wav", "spk01_take01.aug-noise.wav", "spk02_take02.wav"] {
        write_wav(class.join(name), &clip, PcmFormat::Int16).unwrap();
    }
    std::fs::create_dir_all(dir.path().join("class_01")).unwrap();
    for name in ["class_01/spk01_take03.wav", "class_01/spk02_take04.wav"] {
        write_wav(dir.path().join(name), &clip, PcmFormat::Int16).unwrap();
    }
    let m = scan_corpus(dir.path()).unwrap();
    let aug: Vec<_> = m.entries.iter().filter(|e| e.origin == Origin::Augmented).collect();
    assert_eq!(aug.len(), 1);
    assert_eq!(aug[0].group, "class_00/spk01_take01");
    assert_eq!(aug[0].speaker, "spk01");
    // Augmented entries never enter a split.
    let plan = kfold(&m, 2, 1).unwrap();
    let aug_idx = m.entries.iter().position(|e| e.origin == Origin::Augmented).unwrap();
    for f in &plan.folds {
        assert!(!f.validation.contains(&aug_idx) && !f.train.contains(&aug_idx));
    }
}

#[test]
fn holdout_of_ten_takes_per_class_is_two_eight() {
    let m = manifest(29, 10);
    let plan = stratified_split(&m, 0.2, 7).unwrap();
    assert_eq!(plan.test_indices.len(), 58);
    assert_eq!(plan.train_indices.len(), 232);
    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in &plan.test_indices {
        *per_class.entry(m.entries[i].label.as_str()).or_default() += 1;
    }
    assert!(per_class.values().all(|&n| n == 2));
}

#[test]
fn split_plan_json_round_trips() {
    let m = manifest(3, 6);
    let plan = kfold(&m, 3, 2).unwrap();
    assert_eq!(SplitPlan::from_json(&plan.to_json().unwrap()).unwrap(), plan);
    assert!(SplitPlan::from_json("{\"train_indices\": 3}").is_err());
}

fn group_sets(m: &CorpusManifest, idx: &[usize]) -> BTreeSet<String> {
    idx.iter().map(|&i| m.entries[i].group.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn holdout_partitions_groups(classes in 2usize..8, takes in 2usize..12, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let m = manifest(classes, takes);
        let plan = stratified_split(&m, frac, seed).unwrap();
        let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m.len()).collect::<Vec<_>>());
        prop_assert!(group_sets(&m, &plan.train_indices).is_disjoint(&group_sets(&m, &plan.test_indices)));
        for c in m.labels() {
            prop_assert!(plan.test_indices.iter().any(|&i| m.entries[i].label == c));
            prop_assert!(plan.train_indices.iter().any(|&i| m.entries[i].label == c));
        }
        prop_assert_eq!(&stratified_split(&m, frac, seed).unwrap(), &plan);
    }

    #[test]
    fn kfold_validations_tile_the_corpus(classes in 2usize..6, takes in 5usize..12, k in 2usize..6, seed in any::<u64>()) {
        let m = manifest(classes, takes);
        let plan = kfold(&m, k, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let mut seen: Vec<usize> = plan.folds.iter().flat_map(|f| f.validation.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..m.len()).collect::<Vec<_>>());
        for f in &plan.folds {
            prop_assert_eq!(f.train.len() + f.validation.len(), m.len());
            prop_assert!(group_sets(&m, &f.train).is_disjoint(&group_sets(&m, &f.validation)));
        }
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_wav(&bytes);
    }

    #[test]
    fn manifest_parser_never_panics(text in "[a-z_/.,\\n0-9]{0,200}") {
        let _ = CorpusManifest::from_csv(&text, "/tmp");
    }
}

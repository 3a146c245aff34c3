//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (no libtest harness) so every criterion is reported
//! even when an earlier one fails.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mispro::audio::AudioClip;
use mispro::augment::{augment_training_set, pitch_shift, time_stretch, AugmentPlan};
use mispro::bundle::ModelBundle;
use mispro::config::PipelineConfig;
use mispro::corpus::{kfold, stratified_split, CorpusManifest, Origin};
use mispro::dataset::Dataset;
use mispro::dsp::hann;
use mispro::ensembles::{bag_seed, default_committee, train_adaboost_m1, train_stacking, AdaBoostParams};
use mispro::error::Result as MResult;
use mispro::eval::{f1_score, metrics, ConfusionMatrix};
use mispro::features::{dct_ortho, hz_to_mel, idct_ortho, stft, FeatureExtractor, FeatureKind, HOP, N_FFT};
use mispro::learners::forest::bootstrap_indices;
use mispro::learners::{Classifier, Estimator, Knn, LearnerSpec};
use mispro::model::{train_method, Method, MethodParams};
use mispro::pipeline::{bench, run_cv, run_holdout, HoldoutRun, PreparedCorpus};
use mispro::record::{sha256_hex, ReproRecord};
use mispro::seed;
use mispro::synth::{synth_corpus, synth_take, SynthParams};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const SR: u32 = 22050;

fn tone(freq: f64, secs: f64) -> AudioClip {
    let n = (secs * SR as f64) as usize;
    let s = (0..n)
        .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / SR as f64).sin())
        .collect();
    AudioClip::new(s, SR).unwrap()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn corpus_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

// 1 -------------------------------------------------------------------------

/// A confusion matrix whose class 0 has exactly precision `p/1000` and
/// recall `r/1000`.
fn realize(p: u64, r: u64) -> ConfusionMatrix {
    let tp = p * r;
    let fp = r * 1000 - tp;
    let fn_ = p * 1000 - tp;
    ConfusionMatrix::from_counts(vec![vec![tp, fn_], vec![fp, 1_000_000]]).unwrap()
}

fn metric_consistency() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, r, printed) in [(829, 785, 0.806), (970, 952, 0.960)] {
        let m = metrics(&realize(p, r));
        let c = &m.per_class[0];
        assert!((c.precision - p as f64 / 1000.0).abs() < 1e-12 && (c.recall - r as f64 / 1000.0).abs() < 1e-12);
        let direct = f1_score(c.precision, c.recall);
        let hit = (c.f1 - printed).abs() <= 0.0005 && (direct - printed).abs() <= 0.0005;
        ok &= hit;
        parts.push(format!(
            "P={:.3} R={:.3} -> F1={:.6} (target {printed:.3}±0.0005 {})",
            c.precision,
            c.recall,
            c.f1,
            if hit { "ok" } else { "MISS" }
        ));
    }
    check(ok, parts.join("; "))
}

// 2 -------------------------------------------------------------------------

fn feature_shapes(prepared: &PreparedCorpus, cfg: &PipelineConfig) -> Outcome {
    let ex = FeatureExtractor::default();
    let mut bad = Vec::new();
    for i in 0..prepared.len() {
        let clip = cfg.preprocess.apply(prepared.raw_clip(i)).map_err(|e| e.to_string())?;
        let mel = ex.extract(&clip, FeatureKind::Mel128).map_err(|e| e.to_string())?;
        let mfcc = ex.extract(&clip, FeatureKind::Mfcc20).map_err(|e| e.to_string())?;
        if mel.values.len() != 128 || mfcc.values.len() != 20 {
            bad.push(prepared.manifest.entries[i].path.clone());
        }
    }
    let clip = tone(300.0, 1.1);
    let frames = ex.mel_db_frames(&clip).map_err(|e| e.to_string())?;
    let grid = (frames[0].len(), frames.len());
    check(
        bad.is_empty() && grid == (128, 48) && clip.len() == 24255,
        format!(
            "{} clips -> mel 1x128 and mfcc 1x20 ({} wrong); 1.1 s clip -> {}x{} intermediate",
            prepared.len(),
            bad.len(),
            grid.0,
            grid.1
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn direct_dft(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in frame.iter().enumerate() {
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

fn dsp_oracles() -> Outcome {
    let w = hann(N_FFT);
    let mut bin_misses = 0;
    let mut parseval_worst: f64 = 0.0;
    let freqs = [110.0, 440.0, 1000.0, 2017.5, 5555.0, 9876.0];
    for &f in &freqs {
        let clip = tone(f, 0.5);
        let spec = stft(&clip, N_FFT, HOP).unwrap();
        let start = 8 * HOP - N_FFT / 2;
        let frame: Vec<f64> = clip.samples()[start..start + N_FFT]
            .iter()
            .zip(&w)
            .map(|(x, h)| x * h)
            .collect();
        let oracle = direct_dft(&frame);
        if argmax(spec.frame(8)) != argmax(&oracle) {
            bin_misses += 1;
        }
        let m = spec.frame(8);
        let half = N_FFT / 2;
        let freq_energy =
            (m[0].powi(2) + m[half].powi(2) + 2.0 * m[1..half].iter().map(|v| v * v).sum::<f64>()) / N_FFT as f64;
        let time_energy: f64 = frame.iter().map(|v| v * v).sum();
        parseval_worst = parseval_worst.max(((freq_energy - time_energy) / time_energy).abs());
    }
    let mut rng = seed::rng(5);
    let mut dct_worst: f64 = 0.0;
    for n in [20, 40, 128] {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let back = idct_ortho(&dct_ortho(&x));
        dct_worst = dct_worst.max(x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let mel = hz_to_mel(700.0);
    check(
        bin_misses == 0 && dct_worst < 1e-9 && (mel - 781.17).abs() <= 0.01 && parseval_worst < 1e-6,
        format!(
            "peak bins {}/{} exact; DCT round trip {dct_worst:.1e}; mel(700)={mel:.3}; Parseval {parseval_worst:.1e}",
            freqs.len() - bin_misses,
            freqs.len()
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn classifier_oracles() -> Outcome {
    let mut knn_mismatch = 0;
    for s in 0..5u64 {
        let ds = common::gaussian_blobs(200, 6, 4, 1.5, s);
        let queries = common::gaussian_blobs(100, 6, 4, 2.0, 1000 + s);
        let model = Knn::fit(&ds, 3).unwrap();
        knn_mismatch += queries
            .features
            .iter()
            .filter(|q| model.predict(q).unwrap() != common::knn_oracle(&ds, 3, q))
            .count();
    }
    let trees = 60usize;
    let tree_failures = (0..trees)
        .filter(|&s| catch_unwind(|| common::tree_matches_enumeration(s as u64)).is_err())
        .count();
    let grad_gap = (0..3).map(common::logistic_gradient_gap).fold(0.0, f64::max);
    check(
        knn_mismatch == 0 && tree_failures == 0 && grad_gap < 1e-6,
        format!(
            "kNN vs brute force: {knn_mismatch} mismatches over 5x100 queries; tree splits vs enumeration: {}/{trees} trees agree; logistic gradient gap {grad_gap:.1e}",
            trees - tree_failures
        ),
    )
}

// 5 -------------------------------------------------------------------------

struct GroupSpy;

struct GroupSpyModel {
    seen: BTreeSet<u64>,
    n_classes: usize,
}

impl Classifier for GroupSpyModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> MResult<Vec<f64>> {
        let mut s = vec![0.0; self.n_classes];
        s[usize::from(self.seen.contains(&(x[0] as u64)))] = 1.0;
        Ok(s)
    }
}

impl Estimator for GroupSpy {
    type Model = GroupSpyModel;

    fn fit(&self, ds: &Dataset, _: u64) -> MResult<GroupSpyModel> {
        Ok(GroupSpyModel {
            seen: ds.features.iter().map(|x| x[0] as u64).collect(),
            n_classes: ds.n_classes(),
        })
    }
}

/// Counts meta rows whose spy score says the member had seen the row's group.
struct LeakCounter {
    d: usize,
}

struct LeakCount(usize, usize);

impl Classifier for LeakCount {
    fn n_classes(&self) -> usize {
        self.1
    }

    fn predict_scores(&self, _: &[f64]) -> MResult<Vec<f64>> {
        Ok(vec![1.0 / self.1 as f64; self.1])
    }
}

impl Estimator for LeakCounter {
    type Model = LeakCount;

    fn fit(&self, ds: &Dataset, _: u64) -> MResult<LeakCount> {
        let (d, c) = (self.d, ds.n_classes());
        let flagged = ds
            .features
            .iter()
            .filter(|row| row[d + 1] == 1.0 || row[d + c + 1] == 1.0)
            .count();
        Ok(LeakCount(flagged, c))
    }
}

fn ensemble_laws() -> Outcome {
    let ds = common::gaussian_blobs(300, 6, 5, 1.4, 3);
    let boost = train_adaboost_m1(
        &ds,
        &AdaBoostParams {
            rounds: 50,
            base: mispro::learners::TreeParams::with_max_depth(2),
        },
        1,
    )
    .map_err(|e| e.to_string())?;
    let weight_gap = boost
        .rounds
        .iter()
        .map(|r| (r.weight_sum - 1.0).abs())
        .fold(0.0, f64::max);
    let max_err = boost.rounds.iter().map(|r| r.error).fold(0.0, f64::max);

    let n = 1160;
    let unique: Vec<f64> = (0..50)
        .map(|b| {
            bootstrap_indices(n, bag_seed(42, b))
                .iter()
                .collect::<HashSet<_>>()
                .len() as f64
                / n as f64
        })
        .collect();
    let unique_mean = unique.iter().sum::<f64>() / unique.len() as f64;

    let committee = default_committee();
    let small = common::gaussian_blobs(150, 6, 5, 1.0, 4);
    let (stack, audit) =
        train_stacking(&small, &committee, &LearnerSpec::logistic(1.0), 5, 2).map_err(|e| e.to_string())?;
    let width = stack
        .meta_features(&small.features[0])
        .map_err(|e| e.to_string())?
        .len();
    let expected_width = 6 + committee.len() * 5;

    let (mut x, mut y, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for group in 0..40u64 {
        for k in 0..5 {
            x.push(vec![group as f64, k as f64]);
            y.push((group % 4) as usize);
            g.push(format!("g{group}"));
        }
    }
    let grouped = Dataset::new(x, y, g, (0..4).map(|c| format!("c{c}")).collect()).unwrap();
    let (spy, spy_audit) =
        train_stacking(&grouped, &[GroupSpy, GroupSpy], &LeakCounter { d: 2 }, 5, 9).map_err(|e| e.to_string())?;
    let leaks = audit.leakage_violations(&small.groups) + spy_audit.leakage_violations(&grouped.groups) + spy.meta.0;

    check(
        !boost.rounds.is_empty() && weight_gap <= 1e-12 && max_err < 0.5 && (unique_mean - 0.632).abs() <= 0.03
            && width == expected_width && leakage_free(leaks),
        format!(
            "AdaBoost.M1 {} rounds, max |sum w - 1| {weight_gap:.1e}, max eps {max_err:.3}; bootstrap unique fraction {unique_mean:.4}; meta width {width} (expected {expected_width}); leakage violations {leaks}",
            boost.rounds.len()
        ),
    )
}

fn leakage_free(violations: usize) -> bool {
    violations == 0
}

// 6 -------------------------------------------------------------------------

fn peak_bin(c: &AudioClip) -> usize {
    let spec = stft(c, N_FFT, HOP).unwrap();
    let mut acc = vec![0.0; spec.n_bins()];
    for f in spec.frames() {
        for (a, m) in acc.iter_mut().zip(f) {
            *a += m * m;
        }
    }
    argmax(&acc)
}

fn bin_of(freq: f64) -> usize {
    (freq * N_FFT as f64 / SR as f64).round() as usize
}

fn augmentation_laws(prepared: &PreparedCorpus, cfg: &PipelineConfig) -> Outcome {
    let dir = corpus_dir("acceptance-augment");
    let originals = synth_corpus(&dir, &SynthParams::default()).map_err(|e| e.to_string())?;
    let plan = AugmentPlan {
        seed: 42,
        ..AugmentPlan::default()
    };
    let expanded = augment_training_set(&originals, &plan).map_err(|e| e.to_string())?;
    let augmented = expanded
        .entries
        .iter()
        .filter(|e| e.origin == Origin::Augmented)
        .count();

    let a440 = tone(440.0, 1.0);
    let up = pitch_shift(&a440, 12.0).map_err(|e| e.to_string())?;
    let pitch_ok = peak_bin(&up).abs_diff(bin_of(880.0)) <= 1 && up.len().abs_diff(a440.len()) <= HOP;
    let slow = time_stretch(&a440, 0.9).map_err(|e| e.to_string())?;
    let stretch_ok = (slow.len() as f64 - a440.len() as f64 / 0.9).abs() <= HOP as f64
        && peak_bin(&slow).abs_diff(bin_of(440.0)) <= 1;

    // Splits of the expanded manifest never put a derivative in a held-out set,
    // and in-memory derivatives share their source's group.
    let is_aug = |m: &CorpusManifest, i: usize| m.entries[i].origin == Origin::Augmented;
    let mut leaked = 0;
    for s in 0..5 {
        let holdout = stratified_split(&expanded, 0.2, s).map_err(|e| e.to_string())?;
        leaked += holdout.test_indices.iter().filter(|&&i| is_aug(&expanded, i)).count();
        let folds = kfold(&expanded, 5, s).map_err(|e| e.to_string())?;
        leaked += folds
            .folds
            .iter()
            .flat_map(|f| &f.validation)
            .filter(|&&i| is_aug(&expanded, i))
            .count();
        let split = stratified_split(&prepared.manifest, 0.2, s).map_err(|e| e.to_string())?;
        let train = prepared
            .training_set(&split.train_indices, cfg)
            .map_err(|e| e.to_string())?;
        let test_groups: BTreeSet<&str> = split
            .test_indices
            .iter()
            .map(|&i| prepared.manifest.entries[i].group.as_str())
            .collect();
        leaked += train.groups.iter().filter(|g| test_groups.contains(g.as_str())).count();
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(
        expanded.len() == 1450 && augmented == 1160 && pitch_ok && stretch_ok && leaked == 0,
        format!(
            "{} originals -> {} entries; pitch +12: 440 Hz peak -> bin {} (880 Hz = bin {}), length {} vs {}; stretch 0.9: length {} (expected {:.0}); augmented rows in held-out sets: {leaked}",
            originals.len(),
            expanded.len(),
            peak_bin(&up),
            bin_of(880.0),
            up.len(),
            a440.len(),
            slow.len(),
            a440.len() as f64 / 0.9
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn with(cfg: &PipelineConfig, method: Method, seed_value: u64) -> PipelineConfig {
    PipelineConfig {
        method,
        seed: seed_value,
        ..cfg.clone()
    }
}

fn end_to_end(prepared: &PreparedCorpus, cfg: &PipelineConfig, first: &HoldoutRun) -> Outcome {
    let mut ok = first.report.metrics.accuracy >= 0.95;
    let mut lines = vec![format!(
        "seed 42 voting accuracy {:.3} (>= 0.95)",
        first.report.metrics.accuracy
    )];
    for s in 42..47u64 {
        let voting = if s == 42 {
            first.report.metrics.accuracy
        } else {
            run_holdout(prepared, &with(cfg, Method::Voting, s))
                .map_err(|e| e.to_string())?
                .report
                .metrics
                .accuracy
        };
        let mut base = Method::BASE
            .iter()
            .map(|&m| run_holdout(prepared, &with(cfg, m, s)).map(|r| r.report.metrics.accuracy))
            .collect::<MResult<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        base.sort_by(f64::total_cmp);
        let median = base[base.len() / 2];
        ok &= voting >= median;
        lines.push(format!(
            "seed {s}: voting {voting:.3} vs base median {median:.3} [{}]",
            base.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    check(ok, lines.join("; "))
}

// 8 -------------------------------------------------------------------------

fn latency(cfg: &PipelineConfig, run: &HoldoutRun) -> Outcome {
    let clips: Vec<AudioClip> = (0..20)
        .map(|i| {
            let mut s = synth_take(i % 29, 10 + i, 7).unwrap().into_samples();
            s.resize(SR as usize, 0.0);
            AudioClip::new(s, SR).unwrap()
        })
        .collect();
    let stats = bench(&run.model, cfg, &clips, 10, 100).map_err(|e| e.to_string())?;
    check(
        stats.mean_secs < 0.5,
        format!(
            "voting + mel on 1 s clips: mean {:.4} s, p95 {:.4} s over {} runs (bound 0.5 s; machine-dependent)",
            stats.mean_secs, stats.p95_secs, stats.samples
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn bundle_hash(cfg: &PipelineConfig, prepared: &PreparedCorpus, run: &HoldoutRun) -> String {
    let bundle = ModelBundle::new(cfg.clone(), prepared.class_names.clone(), run.model.clone()).unwrap();
    sha256_hex(bundle.to_json().unwrap().as_bytes())
}

fn determinism(prepared: &PreparedCorpus, cfg: &PipelineConfig, first: &HoldoutRun) -> Outcome {
    let voting_cfg = with(cfg, Method::Voting, 42);
    let record = ReproRecord::new("train", &voting_cfg);
    let replay = ReproRecord::from_text(&record.to_text()).map_err(|e| e.to_string())?;
    let again = run_holdout(prepared, &replay.config).map_err(|e| e.to_string())?;
    let train_same = bundle_hash(&voting_cfg, prepared, first) == bundle_hash(&replay.config, prepared, &again)
        && sha256_hex(first.report.deterministic_json().unwrap().as_bytes())
            == sha256_hex(again.report.deterministic_json().unwrap().as_bytes());

    let cv_cfg = with(cfg, Method::Gnb, 42);
    let cv_replay =
        ReproRecord::from_text(&ReproRecord::new("evaluate", &cv_cfg).to_text()).map_err(|e| e.to_string())?;
    let a = run_cv(prepared, &cv_cfg, 5).map_err(|e| e.to_string())?;
    let b = run_cv(prepared, &cv_replay.config, 5).map_err(|e| e.to_string())?;
    let eval_same = sha256_hex(a.deterministic_json().unwrap().as_bytes())
        == sha256_hex(b.deterministic_json().unwrap().as_bytes());

    // Every method's bundle, plus the corpus-trained voting bundle.
    let mut rng = seed::rng(1000);
    let mut mismatches = 0;
    let real = ModelBundle::new(voting_cfg.clone(), prepared.class_names.clone(), first.model.clone()).unwrap();
    let mut bundles = vec![(real, 128)];
    let ds = common::gaussian_blobs(150, 8, 5, 1.0, 8);
    let params = MethodParams {
        forest_trees: 30,
        bagging_bags: 10,
        boost_rounds: 10,
        ..MethodParams::default()
    };
    for m in Method::ALL {
        let model = train_method(m, &ds, &params, 3).map_err(|e| format!("{m}: {e}"))?;
        let mut c = with(cfg, m, 42);
        c.params = params.clone();
        bundles.push((ModelBundle::new(c, ds.class_names.clone(), model).unwrap(), 8));
    }
    for (b, d) in &bundles {
        let back = ModelBundle::from_json(&b.to_json().unwrap()).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let q: Vec<f64> = (0..*d).map(|_| rng.gen_range(-80.0..20.0)).collect();
            if b.predict_features(&q).unwrap() != back.predict_features(&q).unwrap() {
                mismatches += 1;
            }
        }
    }
    check(
        train_same && eval_same && mismatches == 0,
        format!(
            "train rerun from record identical: {train_same}; evaluate rerun identical: {eval_same}; {} bundles x 1000 random inputs, {mismatches} prediction mismatches",
            bundles.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let guard = |f: &mut dyn FnMut() -> Outcome| -> Outcome {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(format!(
                "panicked: {}",
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        }
    };
    results.push(("metric consistency", guard(&mut metric_consistency)));
    results.push(("DSP oracles", guard(&mut dsp_oracles)));
    results.push(("classifier oracles", guard(&mut classifier_oracles)));
    results.push(("ensemble laws", guard(&mut ensemble_laws)));

    let dir = corpus_dir("acceptance-corpus");
    let manifest = synth_corpus(&dir, &SynthParams::default()).expect("synthetic corpus");
    let cfg = PipelineConfig {
        features: FeatureKind::Mel128,
        method: Method::Voting,
        seed: 42,
        ..PipelineConfig::default()
    };
    let prepared = PreparedCorpus::prepare(&manifest, &cfg).expect("prepare corpus");
    results.push(("feature shapes", guard(&mut || feature_shapes(&prepared, &cfg))));
    results.push(("augmentation laws", guard(&mut || augmentation_laws(&prepared, &cfg))));
    let first = run_holdout(&prepared, &cfg);
    match &first {
        Ok(run) => {
            results.push((
                "end-to-end synthetic benchmark",
                guard(&mut || end_to_end(&prepared, &cfg, run)),
            ));
            results.push(("inference latency", guard(&mut || latency(&cfg, run))));
            results.push((
                "determinism and persistence",
                guard(&mut || determinism(&prepared, &cfg, run)),
            ));
        }
        Err(e) => {
            for name in [
                "end-to-end synthetic benchmark",
                "inference latency",
                "determinism and persistence",
            ] {
                results.push((name, Err(format!("voting holdout failed: {e}"))));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);

    println!();
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "\nacceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

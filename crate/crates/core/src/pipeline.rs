//! Holdout and cross-validated evaluation from a corpus manifest.
//!
//! Originals are loaded and preprocessed once. Augmented derivatives are
//! produced in memory from preprocessed training clips only, so nothing
//! derived from a test clip is ever seen during training.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::audio::{load_wav, AudioClip};
use crate::augment::{augment_clip, AugmentPlan};
use crate::config::PipelineConfig;
use crate::corpus::{kfold, stratified_split, CorpusManifest};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{
    bench_inference, metrics, ConfusionMatrix, EvaluationReport, Exclusion, FoldReport, LatencyStats, Metrics, Protocol,
};
use crate::learners::Classifier;
use crate::model::{train_method, Model};
use crate::seed::derive_seed;

/// Per-original state after loading, preprocessing and feature extraction.
#[derive(Debug)]
pub struct PreparedCorpus {
    /// The originals of the input manifest, in manifest order.
    pub manifest: CorpusManifest,
    pub class_names: Vec<String>,
    pub labels: Vec<usize>,
    raw: Vec<AudioClip>,
    clips: Vec<Option<AudioClip>>,
    features: Vec<Option<Vec<f64>>>,
    pub exclusions: Vec<Exclusion>,
    settings: PipelineConfig,
    /// Derivative features per `(original, augmentation seed)`.
    augmented: DerivativeCache,
}

type DerivativeCache = Mutex<HashMap<(usize, u64), Vec<Vec<f64>>>>;

fn excludable(e: &Error) -> bool {
    matches!(e, Error::AllSilent | Error::TooShort { .. })
}

impl PreparedCorpus {
    /// Loads and preprocesses every original entry. Clips that come out
    /// silent or too short are kept as named exclusions; any other failure
    /// aborts.
    pub fn prepare(manifest: &CorpusManifest, config: &PipelineConfig) -> Result<Self> {
        let originals = manifest.subset(&manifest.original_indices());
        if originals.len() < manifest.len() {
            log::info!(
                "ignoring {} augmented manifest entries; derivatives are regenerated in memory",
                manifest.len() - originals.len()
            );
        }
        if originals.is_empty() {
            return Err(Error::EmptyCorpus(manifest.root.clone()));
        }
        let class_names = originals.labels();
        let labels = originals
            .entries
            .iter()
            .map(|e| class_names.binary_search(&e.label).expect("label list covers entries"))
            .collect();
        type Loaded = (AudioClip, Option<AudioClip>, Option<Vec<f64>>, Option<Exclusion>);
        let loaded: Vec<Loaded> = originals
            .entries
            .par_iter()
            .map(|entry| {
                let raw = load_wav(originals.resolve(entry))?;
                let prepared = config
                    .preprocess
                    .apply(&raw)
                    .and_then(|c| config.extractor.extract(&c, config.features).map(|f| (c, f)));
                match prepared {
                    Ok((clip, fv)) => Ok((raw, Some(clip), Some(fv.values), None)),
                    Err(e) if excludable(&e) => {
                        log::warn!("excluding `{}`: {e}", entry.path);
                        let ex = Exclusion {
                            path: entry.path.clone(),
                            reason: e.to_string(),
                        };
                        Ok((raw, None, None, Some(ex)))
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let mut out = Self {
            manifest: originals,
            class_names,
            labels,
            raw: Vec::with_capacity(loaded.len()),
            clips: Vec::with_capacity(loaded.len()),
            features: Vec::with_capacity(loaded.len()),
            exclusions: Vec::new(),
            settings: config.clone(),
            augmented: Mutex::new(HashMap::new()),
        };
        for (raw, clip, fv, ex) in loaded {
            out.raw.push(raw);
            out.clips.push(clip);
            out.features.push(fv);
            out.exclusions.extend(ex);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn raw_clip(&self, i: usize) -> &AudioClip {
        &self.raw[i]
    }

    pub fn features(&self, i: usize) -> Option<&[f64]> {
        self.features[i].as_deref()
    }

    /// Fails unless `config` uses the signal-processing settings this corpus
    /// was prepared with.
    pub fn check_compatible(&self, config: &PipelineConfig) -> Result<()> {
        let a = &self.settings;
        let same_plan = AugmentPlan {
            seed: 0,
            ..a.augment_plan.clone()
        } == AugmentPlan {
            seed: 0,
            ..config.augment_plan.clone()
        };
        if a.preprocess != config.preprocess
            || a.extractor != config.extractor
            || a.features != config.features
            || !same_plan
        {
            return Err(Error::Config(
                "preprocessing, feature or augmentation settings differ from those the corpus was prepared with".into(),
            ));
        }
        Ok(())
    }

    fn augmented_features(&self, i: usize, plan: &AugmentPlan, config: &PipelineConfig) -> Result<Vec<Vec<f64>>> {
        let key = (i, plan.seed);
        if let Some(rows) = self.augmented.lock().expect("cache lock").get(&key) {
            return Ok(rows.clone());
        }
        let Some(clip) = &self.clips[i] else {
            return Ok(Vec::new());
        };
        let group = &self.manifest.entries[i].group;
        let mut rows = Vec::new();
        for (technique, derived) in augment_clip(clip, plan, group) {
            let fv = derived.and_then(|d| config.extractor.extract(&d, config.features));
            match fv {
                Ok(fv) => rows.push(fv.values),
                Err(e) if excludable(&e) || matches!(e, Error::Parameter(_)) => {
                    log::warn!("skipped {} derivative of `{group}`: {e}", technique.as_str());
                }
                Err(e) => return Err(e),
            }
        }
        self.augmented.lock().expect("cache lock").insert(key, rows.clone());
        Ok(rows)
    }

    /// Training rows for the given originals: their own features, plus four
    /// derivatives each when augmentation is on.
    pub fn training_set(&self, indices: &[usize], config: &PipelineConfig) -> Result<Dataset> {
        self.check_compatible(config)?;
        let plan = AugmentPlan {
            seed: derive_seed(config.seed, "augment"),
            ..config.augment_plan.clone()
        };
        let per_row: Vec<Vec<(Vec<f64>, usize, String)>> = indices
            .par_iter()
            .map(|&i| {
                let Some(own) = &self.features[i] else {
                    return Ok(Vec::new());
                };
                let group = self.manifest.entries[i].group.clone();
                let mut rows = vec![(own.clone(), self.labels[i], group.clone())];
                if config.augment {
                    for fv in self.augmented_features(i, &plan, config)? {
                        rows.push((fv, self.labels[i], group.clone()));
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        let (mut x, mut y, mut g) = (Vec::new(), Vec::new(), Vec::new());
        for (f, l, grp) in per_row.into_iter().flatten() {
            x.push(f);
            y.push(l);
            g.push(grp);
        }
        if x.is_empty() {
            return Err(Error::InvalidDataset("no usable training clips".into()));
        }
        Dataset::new(x, y, g, self.class_names.clone())
    }

    /// Predicts every usable clip in `indices`; excluded ones are reported.
    fn score(&self, model: &Model, indices: &[usize]) -> Result<(ConfusionMatrix, Vec<Exclusion>)> {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        let mut excluded = Vec::new();
        for &i in indices {
            match &self.features[i] {
                Some(f) => {
                    truth.push(self.labels[i]);
                    pred.push(model.predict(f)?);
                }
                None => excluded.extend(
                    self.exclusions
                        .iter()
                        .filter(|e| e.path == self.manifest.entries[i].path)
                        .cloned(),
                ),
            }
        }
        Ok((ConfusionMatrix::new(&truth, &pred, self.class_names.len())?, excluded))
    }
}

/// Raw clip to predicted class id, the full per-sample inference path.
pub fn infer(model: &Model, config: &PipelineConfig, clip: &AudioClip) -> Result<usize> {
    let prepared = config.preprocess.apply(clip)?;
    let fv = config.extractor.extract(&prepared, config.features)?;
    model.predict(&fv.values)
}

/// A trained model together with the report of its holdout evaluation.
#[derive(Debug, Clone)]
pub struct HoldoutRun {
    pub model: Model,
    pub report: EvaluationReport,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub fn train_seed(config: &PipelineConfig) -> u64 {
    derive_seed(config.seed, "train")
}

fn split_seed(config: &PipelineConfig) -> u64 {
    derive_seed(config.seed, "split")
}

/// Group-aware holdout: split originals, train on the (augmented) training
/// side, score the untouched test originals and time the full inference path
/// on each test clip.
pub fn run_holdout(prepared: &PreparedCorpus, config: &PipelineConfig) -> Result<HoldoutRun> {
    config.validate()?;
    let plan = stratified_split(&prepared.manifest, config.test_fraction, split_seed(config))?;
    let ds = prepared.training_set(&plan.train_indices, config)?;
    let model = train_method(config.method, &ds, &config.params, train_seed(config))?;
    let (confusion, exclusions) = prepared.score(&model, &plan.test_indices)?;
    let clips: Vec<AudioClip> = plan
        .test_indices
        .iter()
        .filter(|&&i| prepared.features[i].is_some())
        .map(|&i| prepared.raw[i].clone())
        .collect();
    let latency = if clips.is_empty() {
        None
    } else {
        Some(bench_inference(&clips, 0, clips.len(), |c| {
            infer(&model, config, c).map(drop)
        })?)
    };
    let report = EvaluationReport {
        method: config.method.as_str().into(),
        method_label: config.method.display_name(&config.params),
        feature_kind: config.features.as_str().into(),
        protocol: Protocol::Holdout {
            test_fraction: config.test_fraction,
        },
        class_names: prepared.class_names.clone(),
        n_train: ds.len(),
        n_test: confusion.total() as usize,
        metrics: metrics(&confusion),
        confusion,
        folds: Vec::new(),
        exclusions,
        latency,
    };
    Ok(HoldoutRun {
        model,
        report,
        train_indices: plan.train_indices,
        test_indices: plan.test_indices,
    })
}

/// Group-aware k-fold evaluation. Folds train concurrently; the summary
/// metrics are fold means and the confusion matrix is pooled.
pub fn run_cv(prepared: &PreparedCorpus, config: &PipelineConfig, k: usize) -> Result<EvaluationReport> {
    config.validate()?;
    let plan = kfold(&prepared.manifest, k, split_seed(config))?;
    let folds: Vec<(FoldReport, Vec<Exclusion>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let ds = prepared.training_set(&fold.train, config)?;
            let seed = crate::seed::derive_index(train_seed(config), f as u64);
            let model = train_method(config.method, &ds, &config.params, seed)?;
            let (confusion, excluded) = prepared.score(&model, &fold.validation)?;
            let report = FoldReport {
                fold: f,
                n_train: ds.len(),
                n_validation: confusion.total() as usize,
                metrics: metrics(&confusion),
                confusion,
            };
            Ok((report, excluded))
        })
        .collect::<Result<_>>()?;
    let c = prepared.class_names.len();
    let mut pooled = ConfusionMatrix::from_counts(vec![vec![0; c]; c])?;
    let mut exclusions = Vec::new();
    for (fr, ex) in &folds {
        pooled.merge(&fr.confusion)?;
        exclusions.extend(ex.iter().cloned());
    }
    let n = folds.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| folds.iter().map(|(r, _)| f(&r.metrics)).sum::<f64>() / n;
    let summary = Metrics {
        accuracy: mean(|m| m.accuracy),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        per_class: metrics(&pooled).per_class,
    };
    Ok(EvaluationReport {
        method: config.method.as_str().into(),
        method_label: config.method.display_name(&config.params),
        feature_kind: config.features.as_str().into(),
        protocol: Protocol::Cv { k },
        class_names: prepared.class_names.clone(),
        n_train: folds.iter().map(|(r, _)| r.n_train).sum::<usize>() / folds.len(),
        n_test: pooled.total() as usize,
        metrics: summary,
        confusion: pooled,
        folds: folds.into_iter().map(|(r, _)| r).collect(),
        exclusions,
        latency: None,
    })
}

/// Trains on every usable original (plus derivatives) without holding any out.
pub fn train_full(prepared: &PreparedCorpus, config: &PipelineConfig) -> Result<Model> {
    config.validate()?;
    let all: Vec<usize> = (0..prepared.len()).collect();
    let ds = prepared.training_set(&all, config)?;
    train_method(config.method, &ds, &config.params, train_seed(config))
}

/// Latency of the full inference path over `clips`.
pub fn bench(
    model: &Model,
    config: &PipelineConfig,
    clips: &[AudioClip],
    warmup: usize,
    reps: usize,
) -> Result<LatencyStats> {
    bench_inference(clips, warmup, reps, |c| infer(model, config, c).map(drop))
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use mispro::audio::{load_wav, write_wav, PcmFormat};
use mispro::augment::{augment_training_set, AugmentPlan};
use mispro::bundle::ModelBundle;
use mispro::config::PipelineConfig;
use mispro::corpus::{stratified_split, CorpusManifest, ManifestEntry, Origin};
use mispro::error::{Error, Result};
use mispro::eval::{render_table, EvaluationReport};
use mispro::features::{write_feature_table, FeatureRow};
use mispro::model::Method;
use mispro::pipeline::{self, PreparedCorpus};
use mispro::record::{corpus_digest, sha256_file, sha256_hex, ReproRecord};
use mispro::seed::derive_seed;
use mispro::synth::{synth_corpus as generate, SynthParams};

pub struct GlobalOpts {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
}

type Overrides<'a> = [(&'a str, Option<String>)];

impl GlobalOpts {
    /// Defaults, then the config file, then command flags, then `--seed`.
    fn config(&self, overrides: &Overrides) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_text(&text)?;
        }
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

/// `dir/name.ext` -> `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or("out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn record_inputs(rec: &mut ReproRecord, manifest_path: &Path, manifest: &CorpusManifest) -> Result<()> {
    rec.inputs
        .push((manifest_path.display().to_string(), sha256_file(manifest_path)?));
    rec.inputs.push(("corpus".into(), corpus_digest(manifest)?));
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    say!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    );
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 29)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    takes: usize,
}

pub fn synth_corpus(g: &GlobalOpts, a: SynthArgs) -> Result<()> {
    let cfg = g.config(&[])?;
    let manifest = generate(
        &a.out,
        &SynthParams {
            classes: a.classes,
            takes: a.takes,
            seed: cfg.seed,
        },
    )?;
    let mut rec = ReproRecord::new(
        &format!("synth-corpus --classes {} --takes {}", a.classes, a.takes),
        &cfg,
    );
    rec.outputs.push(("corpus".into(), corpus_digest(&manifest)?));
    rec.write(a.out.join("repro.cfg"))?;
    say!(
        "wrote {} clips in {} classes to {}",
        manifest.len(),
        a.classes,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for cleaned WAVs and their manifest
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    top_db: Option<f64>,
    /// Analysis window for both the gate and the trimmer
    #[arg(long)]
    n_fft: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    gate_sigma: Option<f64>,
}

pub fn prep(g: &GlobalOpts, a: PrepArgs) -> Result<()> {
    let cfg = g.config(&[
        ("top_db", opt(&a.top_db)),
        ("gate_n_fft", opt(&a.n_fft)),
        ("trim_frame", opt(&a.n_fft)),
        ("gate_hop", opt(&a.hop)),
        ("trim_hop", opt(&a.hop)),
        ("gate_sigma", opt(&a.gate_sigma)),
    ])?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let results: Vec<Option<ManifestEntry>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let clip = load_wav(manifest.resolve(entry))?;
            match cfg.preprocess.apply(&clip) {
                Ok(clean) => {
                    let dest = a.out.join(&entry.path);
                    if let Some(dir) = dest.parent() {
                        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    }
                    write_wav(dest, &clean, PcmFormat::Float32)?;
                    Ok(Some(entry.clone()))
                }
                Err(e @ (Error::AllSilent | Error::TooShort { .. })) => {
                    log::warn!("dropping `{}`: {e}", entry.path);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let dropped = results.iter().filter(|r| r.is_none()).count();
    let mut kept: Vec<ManifestEntry> = results.into_iter().flatten().collect();
    let originals: std::collections::BTreeSet<String> = kept
        .iter()
        .filter(|e| e.origin == Origin::Original)
        .map(|e| e.group.clone())
        .collect();
    kept.retain(|e| e.origin == Origin::Original || originals.contains(&e.group));
    let out_manifest = CorpusManifest::new(&a.out, kept)?;
    let out_path = a.out.join("manifest.csv");
    out_manifest.write(&out_path)?;
    let mut rec = ReproRecord::new(&format!("prep --manifest {}", a.manifest.display()), &cfg);
    record_inputs(&mut rec, &a.manifest, &manifest)?;
    rec.outputs.push(("corpus".into(), corpus_digest(&out_manifest)?));
    rec.write(a.out.join("repro.cfg"))?;
    say!(
        "cleaned {} clips into {} ({dropped} dropped as silent or too short)",
        out_manifest.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Split originals first and augment only the training side; the split is
    /// saved as `split.json` beside the manifest
    #[arg(long)]
    holdout: bool,
    /// File name of the output manifest, written beside the input manifest
    #[arg(long, default_value = "manifest.augmented.csv")]
    out_name: String,
    #[arg(long)]
    snr_db: Option<f64>,
    /// Circular shift magnitude as a fraction of the clip
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<f64>,
    #[arg(long)]
    stretch_lo: Option<f64>,
    #[arg(long)]
    stretch_hi: Option<f64>,
    /// Comma-separated semitone offsets, e.g. `-2,-1,1,2`
    #[arg(long, allow_hyphen_values = true)]
    semitones: Option<String>,
}

pub fn augment(g: &GlobalOpts, a: AugmentArgs) -> Result<()> {
    let cfg = g.config(&[
        ("snr_db", opt(&a.snr_db)),
        ("shift_fraction", opt(&a.shift)),
        ("stretch_lo", opt(&a.stretch_lo)),
        ("stretch_hi", opt(&a.stretch_hi)),
        ("semitones", a.semitones.clone()),
    ])?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let originals = manifest.subset(&manifest.original_indices());
    let train = if a.holdout {
        let split = stratified_split(&originals, cfg.test_fraction, derive_seed(cfg.seed, "split"))?;
        write_text(&originals.root.join("split.json"), &split.to_json()?)?;
        originals.subset(&split.train_indices)
    } else {
        originals.clone()
    };
    let plan = AugmentPlan {
        seed: derive_seed(cfg.seed, "augment"),
        ..cfg.augment_plan.clone()
    };
    let augmented = augment_training_set(&train, &plan)?;
    let mut entries = originals.entries.clone();
    entries.extend(augmented.entries.into_iter().filter(|e| e.origin == Origin::Augmented));
    let mut out = CorpusManifest::new(&originals.root, entries)?;
    out.warnings = augmented.warnings;
    let out_path = originals.root.join(&a.out_name);
    out.write(&out_path)?;
    let mut rec = ReproRecord::new(
        &format!(
            "augment --manifest {}{}",
            a.manifest.display(),
            if a.holdout { " --holdout" } else { "" }
        ),
        &cfg,
    );
    record_inputs(&mut rec, &a.manifest, &manifest)?;
    rec.outputs.push(("corpus".into(), corpus_digest(&out)?));
    rec.write(sibling(&out_path, "repro.cfg"))?;
    say!(
        "{} training originals -> {} entries in {}",
        train.len(),
        train.len() + out.len() - originals.len(),
        out_path.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `mel` (1x128) or `mfcc` (1x20)
    #[arg(long)]
    features: Option<String>,
    /// Noise-gate and trim each clip before extraction
    #[arg(long)]
    preprocess: bool,
}

pub fn extract(g: &GlobalOpts, a: ExtractArgs) -> Result<()> {
    let cfg = g.config(&[("features", a.features.clone())])?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let rows: Vec<Option<FeatureRow>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let clip = load_wav(manifest.resolve(entry))?;
            let clip = if a.preprocess {
                cfg.preprocess.apply(&clip)
            } else {
                Ok(clip)
            };
            match clip.and_then(|c| cfg.extractor.extract(&c, cfg.features)) {
                Ok(vector) => Ok(Some(FeatureRow {
                    group: entry.group.clone(),
                    label: entry.label.clone(),
                    vector,
                })),
                Err(e @ (Error::AllSilent | Error::TooShort { .. })) => {
                    log::warn!("skipping `{}`: {e}", entry.path);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let rows: Vec<FeatureRow> = rows.into_iter().flatten().collect();
    let table = write_feature_table(&rows)?;
    write_text(&a.out, &table)?;
    let mut rec = ReproRecord::new(
        &format!(
            "extract --manifest {}{}",
            a.manifest.display(),
            if a.preprocess { " --preprocess" } else { "" }
        ),
        &cfg,
    );
    record_inputs(&mut rec, &a.manifest, &manifest)?;
    rec.outputs
        .push((a.out.display().to_string(), sha256_hex(table.as_bytes())));
    rec.write(sibling(&a.out, "repro.cfg"))?;
    say!("wrote {} {} rows to {}", rows.len(), cfg.features, a.out.display());
    Ok(())
}

fn print_exclusions(report: &EvaluationReport) {
    for ex in &report.exclusions {
        eprintln!("excluded {}: {}", ex.path, ex.reason);
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    features: Option<String>,
    /// Model bundle path; report, confusion matrix and record go beside it
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

pub fn train(g: &GlobalOpts, a: TrainArgs) -> Result<()> {
    let cfg = g.config(&[("method", a.method.clone()), ("features", a.features.clone())])?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let prepared = PreparedCorpus::prepare(&manifest, &cfg)?;
    let run = pipeline::run_holdout(&prepared, &cfg)?;
    let bundle = ModelBundle::new(cfg.clone(), prepared.class_names.clone(), run.model)?;
    let bundle_json = bundle.to_json()?;
    write_text(&a.out, &bundle_json)?;
    write_text(&sibling(&a.out, "report.json"), &run.report.to_json()?)?;
    write_text(
        &sibling(&a.out, "confusion.csv"),
        &run.report.confusion.to_csv(&run.report.class_names),
    )?;
    let mut rec = ReproRecord::new(&format!("train --manifest {}", a.manifest.display()), &cfg);
    record_inputs(&mut rec, &a.manifest, &manifest)?;
    rec.outputs.push(("bundle".into(), sha256_hex(bundle_json.as_bytes())));
    rec.outputs
        .push(("report".into(), sha256_hex(run.report.deterministic_json()?.as_bytes())));
    rec.write(sibling(&a.out, "repro.cfg"))?;
    say!("{}", render_table(&[&run.report]).trim_end());
    print_exclusions(&run.report);
    say!("saved {}", a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// One method or a comma-separated list
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    features: Option<String>,
    /// k-fold cross-validation instead of the holdout split
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

pub fn evaluate(g: &GlobalOpts, a: EvaluateArgs) -> Result<()> {
    let methods: Vec<Method> = match &a.method {
        Some(list) => list.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?,
        None => vec![g.config(&[])?.method],
    };
    let first = methods.first().map(|m| m.as_str().to_string());
    let cfg = g.config(&[
        ("method", first),
        ("features", a.features.clone()),
        ("cv_folds", opt(&a.cv)),
    ])?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let prepared = PreparedCorpus::prepare(&manifest, &cfg)?;
    let mut reports = Vec::new();
    for &method in &methods {
        let cfg = PipelineConfig { method, ..cfg.clone() };
        let report = match a.cv {
            Some(k) => pipeline::run_cv(&prepared, &cfg, k)?,
            None => pipeline::run_holdout(&prepared, &cfg)?.report,
        };
        write_text(
            &sibling(&a.out, &format!("{}.confusion.csv", method.as_str())),
            &report.confusion.to_csv(&report.class_names),
        )?;
        reports.push(report);
    }
    let json = if reports.len() == 1 {
        reports[0].to_json()?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    write_text(&a.out, &json)?;
    let digest_input = reports
        .iter()
        .map(EvaluationReport::deterministic_json)
        .collect::<Result<Vec<_>>>()?
        .join("\n");
    let method_list: Vec<&str> = methods.iter().map(|m| m.as_str()).collect();
    let mut rec = ReproRecord::new(
        &format!(
            "evaluate --manifest {} --method {}{}",
            a.manifest.display(),
            method_list.join(","),
            a.cv.map_or(String::new(), |k| format!(" --cv {k}"))
        ),
        &cfg,
    );
    record_inputs(&mut rec, &a.manifest, &manifest)?;
    rec.outputs.push(("report".into(), sha256_hex(digest_input.as_bytes())));
    rec.write(sibling(&a.out, "repro.cfg"))?;
    let refs: Vec<&EvaluationReport> = reports.iter().collect();
    say!("{}", render_table(&refs).trim_end());
    for r in &reports {
        print_exclusions(r);
    }
    say!("saved {}", a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    wav: PathBuf,
}

pub fn predict(_g: &GlobalOpts, a: PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let clip = load_wav(&a.wav)?;
    let start = Instant::now();
    let pred = bundle.predict(&clip)?;
    let elapsed = start.elapsed().as_secs_f64();
    let scores: Vec<_> = bundle
        .class_names
        .iter()
        .zip(&pred.scores)
        .map(|(label, score)| json!({ "label": label, "score": score }))
        .collect();
    print_json(&json!({
        "label": pred.label,
        "class_id": pred.class_id,
        "scores": scores,
        "elapsed_secs": elapsed,
    }));
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clips to time; only original entries are used
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Use only the first N clips
    #[arg(long)]
    clips: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bench(_g: &GlobalOpts, a: BenchArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let mut idx = manifest.original_indices();
    if let Some(n) = a.clips {
        idx.truncate(n);
    }
    let clips = idx
        .iter()
        .map(|&i| load_wav(manifest.resolve(&manifest.entries[i])))
        .collect::<Result<Vec<_>>>()?;
    let stats = pipeline::bench(&bundle.model, &bundle.config, &clips, a.warmup, a.reps)?;
    let out = json!({
        "method": bundle.config.method.as_str(),
        "features": bundle.config.features.as_str(),
        "clips": clips.len(),
        "warmup": a.warmup,
        "reps": a.reps,
        "mean_secs": stats.mean_secs,
        "p95_secs": stats.p95_secs,
        "note": "wall-clock seconds per clip on this machine (preprocess + features + predict)",
    });
    print_json(&out);
    if let Some(path) = &a.out {
        write_text(path, &serde_json::to_string_pretty(&out)?)?;
        let mut rec = ReproRecord::new(
            &format!(
                "bench --model {} --manifest {}",
                a.model.display(),
                a.manifest.display()
            ),
            &bundle.config,
        );
        rec.inputs.push((a.model.display().to_string(), sha256_file(&a.model)?));
        record_inputs(&mut rec, &a.manifest, &manifest)?;
        rec.write(sibling(path, "repro.cfg"))?;
    }
    Ok(())
}

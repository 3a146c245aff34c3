//! Pipeline configuration and its flat `key = value` text form.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors. Serializing and parsing back yields an equal config.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentPlan;
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureKind, MfccMode};
use crate::model::{Method, MethodParams};
use crate::preprocess::Preprocessor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureKind,
    pub method: Method,
    pub seed: u64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub augment: bool,
    /// `seed` inside the plan is ignored; it is derived from the master seed.
    pub augment_plan: AugmentPlan,
    pub preprocess: Preprocessor,
    pub extractor: FeatureExtractor,
    pub params: MethodParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureKind::Mel128,
            method: Method::Voting,
            seed: 42,
            test_fraction: 0.2,
            cv_folds: 5,
            augment: true,
            augment_plan: AugmentPlan::default(),
            preprocess: Preprocessor::default(),
            extractor: FeatureExtractor::default(),
            params: MethodParams::default(),
        }
    }
}

/// Every accepted key, in the order `to_text` writes them.
pub const KEYS: [&str; 36] = [
    "features",
    "method",
    "seed",
    "test_fraction",
    "cv_folds",
    "augment",
    "snr_db",
    "shift_fraction",
    "stretch_lo",
    "stretch_hi",
    "semitones",
    "gate_n_fft",
    "gate_hop",
    "gate_noise_quantile",
    "gate_sigma",
    "gate_smooth_bins",
    "gate_smooth_frames",
    "gate_floor_db",
    "gate_min_contrast_db",
    "top_db",
    "trim_frame",
    "trim_hop",
    "n_fft",
    "hop",
    "mfcc_mode",
    "svm_c",
    "knn_k",
    "tree_max_depth",
    "tree_min_leaf",
    "forest_trees",
    "bagging_bags",
    "bagging_base",
    "boost_rounds",
    "boost_depth",
    "lr_l2",
    "stacking_folds",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

impl PipelineConfig {
    /// Assigns one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let cfg = |e: Error| Error::Config(format!("`{key}`: {e}"));
        let gate = &mut self.preprocess.gate;
        let trim = &mut self.preprocess.trim;
        let plan = &mut self.augment_plan;
        let p = &mut self.params;
        match key {
            "features" => self.features = value.parse().map_err(cfg)?,
            "method" => self.method = value.parse().map_err(cfg)?,
            "seed" => self.seed = parse_num(key, value)?,
            "test_fraction" => self.test_fraction = parse_num(key, value)?,
            "cv_folds" => self.cv_folds = parse_num(key, value)?,
            "augment" => self.augment = parse_bool(key, value)?,
            "snr_db" => plan.snr_db = parse_num(key, value)?,
            "shift_fraction" => plan.shift_fraction = parse_num(key, value)?,
            "stretch_lo" => plan.stretch_lo = parse_num(key, value)?,
            "stretch_hi" => plan.stretch_hi = parse_num(key, value)?,
            "semitones" => {
                plan.semitones = value
                    .split(',')
                    .map(|s| parse_num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "gate_n_fft" => gate.n_fft = parse_num(key, value)?,
            "gate_hop" => gate.hop = parse_num(key, value)?,
            "gate_noise_quantile" => gate.noise_quantile = parse_num(key, value)?,
            "gate_sigma" => gate.threshold_sigma = parse_num(key, value)?,
            "gate_smooth_bins" => gate.smooth_bins = parse_num(key, value)?,
            "gate_smooth_frames" => gate.smooth_frames = parse_num(key, value)?,
            "gate_floor_db" => gate.attenuation_floor_db = parse_num(key, value)?,
            "gate_min_contrast_db" => gate.min_contrast_db = parse_num(key, value)?,
            "top_db" => trim.top_db = parse_num(key, value)?,
            "trim_frame" => trim.frame = parse_num(key, value)?,
            "trim_hop" => trim.hop = parse_num(key, value)?,
            "n_fft" => self.extractor.n_fft = parse_num(key, value)?,
            "hop" => self.extractor.hop = parse_num(key, value)?,
            "mfcc_mode" => self.extractor.mfcc_mode = value.parse::<MfccMode>().map_err(cfg)?,
            "svm_c" => p.svm_c = parse_num(key, value)?,
            "knn_k" => p.knn_k = parse_num(key, value)?,
            "tree_max_depth" => {
                p.tree_max_depth = match value {
                    "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "tree_min_leaf" => p.tree_min_leaf = parse_num(key, value)?,
            "forest_trees" => p.forest_trees = parse_num(key, value)?,
            "bagging_bags" => p.bagging_bags = parse_num(key, value)?,
            "bagging_base" => p.bagging_base = value.parse()?,
            "boost_rounds" => p.boost_rounds = parse_num(key, value)?,
            "boost_depth" => p.boost_depth = parse_num(key, value)?,
            "lr_l2" => p.lr_l2 = parse_num(key, value)?,
            "stacking_folds" => p.stacking_folds = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let gate = &self.preprocess.gate;
        let trim = &self.preprocess.trim;
        let plan = &self.augment_plan;
        let p = &self.params;
        match key {
            "features" => self.features.as_str().into(),
            "method" => self.method.as_str().into(),
            "seed" => self.seed.to_string(),
            "test_fraction" => self.test_fraction.to_string(),
            "cv_folds" => self.cv_folds.to_string(),
            "augment" => self.augment.to_string(),
            "snr_db" => plan.snr_db.to_string(),
            "shift_fraction" => plan.shift_fraction.to_string(),
            "stretch_lo" => plan.stretch_lo.to_string(),
            "stretch_hi" => plan.stretch_hi.to_string(),
            "semitones" => plan.semitones.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            "gate_n_fft" => gate.n_fft.to_string(),
            "gate_hop" => gate.hop.to_string(),
            "gate_noise_quantile" => gate.noise_quantile.to_string(),
            "gate_sigma" => gate.threshold_sigma.to_string(),
            "gate_smooth_bins" => gate.smooth_bins.to_string(),
            "gate_smooth_frames" => gate.smooth_frames.to_string(),
            "gate_floor_db" => gate.attenuation_floor_db.to_string(),
            "gate_min_contrast_db" => gate.min_contrast_db.to_string(),
            "top_db" => trim.top_db.to_string(),
            "trim_frame" => trim.frame.to_string(),
            "trim_hop" => trim.hop.to_string(),
            "n_fft" => self.extractor.n_fft.to_string(),
            "hop" => self.extractor.hop.to_string(),
            "mfcc_mode" => match self.extractor.mfcc_mode {
                MfccMode::Tail => "tail".into(),
                MfccMode::Deltas => "deltas".into(),
            },
            "svm_c" => p.svm_c.to_string(),
            "knn_k" => p.knn_k.to_string(),
            "tree_max_depth" => p.tree_max_depth.map_or("none".into(), |d| d.to_string()),
            "tree_min_leaf" => p.tree_min_leaf.to_string(),
            "forest_trees" => p.forest_trees.to_string(),
            "bagging_bags" => p.bagging_bags.to_string(),
            "bagging_base" => p.bagging_base.as_str().into(),
            "boost_rounds" => p.boost_rounds.to_string(),
            "boost_depth" => p.boost_depth.to_string(),
            "lr_l2" => p.lr_l2.to_string(),
            "stacking_folds" => p.stacking_folds.to_string(),
            _ => unreachable!("get called with unknown key {key}"),
        }
    }

    /// Applies the pairs in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: `{key}` given twice", n + 1)));
            }
            self.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Parses a full config; absent keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |what: &str, e: Error| Error::Config(format!("{what}: {e}"));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction {} not in (0, 1)",
                self.test_fraction
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be >= 2".into()));
        }
        let ex = &self.extractor;
        if ex.n_fft < 2 || !ex.n_fft.is_multiple_of(2) || ex.hop == 0 || ex.hop > ex.n_fft {
            return Err(Error::Config(format!(
                "feature analysis n_fft = {}, hop = {} is not a valid STFT geometry",
                ex.n_fft, ex.hop
            )));
        }
        let g = &self.preprocess.gate;
        if g.n_fft < 2 || !g.n_fft.is_multiple_of(2) {
            return Err(Error::Config("gate_n_fft must be even and >= 2".into()));
        }
        self.augment_plan.validate().map_err(|e| wrap("augmentation", e))?;
        g.validate().map_err(|e| wrap("gate", e))?;
        self.preprocess.trim.validate().map_err(|e| wrap("trim", e))?;
        self.params.validate()
    }
}

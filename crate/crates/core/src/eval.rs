//! Confusion matrices, macro-averaged metrics, report rendering and latency
//! statistics.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Parameter(format!(
                "{} true labels but {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Parameter(format!(
                    "label pair ({t}, {p}) outside 0..{n_classes}"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::Parameter("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum::<u64>() - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> u64 {
        self.counts[c].iter().sum::<u64>() - self.tp(c)
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.fp(c) - self.fn_(c)
    }

    /// Element-wise sum; both matrices must have the same class count.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::Shape {
                expected: self.n_classes(),
                got: other.n_classes(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// CSV with a `true\pred` corner cell and class names on both axes.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("true\\pred");
        for name in class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in class_names.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the class was never predicted, so precision was 0/0.
    pub precision_undefined: bool,
    /// Set when the class never occurs, so recall was 0/0.
    pub recall_undefined: bool,
}

/// Accuracy plus unweighted class means of precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| {
            let tp = cm.tp(c);
            let (precision, precision_undefined) = ratio(tp, tp + cm.fp(c));
            let (recall, recall_undefined) = ratio(tp, tp + cm.fn_(c));
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: tp + cm.fn_(c),
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let n = per_class.len().max(1) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    let diag: u64 = (0..cm.n_classes()).map(|c| cm.tp(c)).sum();
    Metrics {
        accuracy: ratio(diag, cm.total()).0,
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        per_class,
    }
}

/// Wall-clock seconds per sample. Machine-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_secs: f64,
    pub p95_secs: f64,
    pub samples: usize,
}

impl LatencyStats {
    /// Nearest-rank 95th percentile.
    pub fn from_samples(secs: &[f64]) -> Option<Self> {
        if secs.is_empty() {
            return None;
        }
        let mut sorted = secs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        let mean = secs.iter().sum::<f64>() / secs.len() as f64;
        Some(Self {
            // Keep mean <= p95 when float summation lands a hair above it.
            mean_secs: mean.min(sorted[sorted.len() - 1]),
            p95_secs: sorted[rank - 1].max(mean),
            samples: secs.len(),
        })
    }
}

/// Times `run` over `clips` round-robin: `warmup` untimed calls, then `reps`
/// timed ones.
pub fn bench_inference<F>(clips: &[AudioClip], warmup: usize, reps: usize, mut run: F) -> Result<LatencyStats>
where
    F: FnMut(&AudioClip) -> Result<()>,
{
    if clips.is_empty() || reps == 0 {
        return Err(Error::Parameter("benchmark needs at least one clip and one rep".into()));
    }
    for i in 0..warmup {
        run(&clips[i % clips.len()])?;
    }
    let mut secs = Vec::with_capacity(reps);
    for i in 0..reps {
        let start = Instant::now();
        run(&clips[i % clips.len()])?;
        secs.push(start.elapsed().as_secs_f64());
    }
    Ok(LatencyStats::from_samples(&secs).expect("reps > 0"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Protocol {
    Holdout { test_fraction: f64 },
    Cv { k: usize },
}

/// A clip left out of evaluation, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

/// Everything an evaluation run produces. `latency` is the only field that
/// varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub method_label: String,
    pub feature_kind: String,
    pub protocol: Protocol,
    pub class_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub folds: Vec<FoldReport>,
    pub exclusions: Vec<Exclusion>,
    pub latency: Option<LatencyStats>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON of the report without timing, the part reruns must reproduce.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.latency = None;
        Ok(serde_json::to_string(&copy)?)
    }
}

/// Aligned plain-text table, one row per report, three decimals.
pub fn render_table(reports: &[&EvaluationReport]) -> String {
    let head = ["Method", "Accuracy", "Precision", "Recall", "F1-Score"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.method_label.clone(),
                format!("{:.3}", r.metrics.accuracy),
                format!("{:.3}", r.metrics.precision),
                format!("{:.3}", r.metrics.recall),
                format!("{:.3}", r.metrics.f1),
            ]
        })
        .collect();
    let mut widths = head.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            let _ = write!(s, "  {cell:>w$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&head);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

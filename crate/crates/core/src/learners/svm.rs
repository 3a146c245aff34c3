//! One-vs-rest linear soft-margin SVM trained by dual coordinate descent.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, softmax, Classifier};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the projected-gradient spread of an epoch falls below this.
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 0.02,
            tol: 1e-4,
            max_epochs: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub standardizer: Standardizer,
    /// One `[w_0 .. w_{d-1}, bias]` row per class.
    pub weights: Vec<Vec<f64>>,
}

/// Hinge-loss dual coordinate descent for one binary problem; the bias is
/// learned as the weight of a constant feature.
///
/// Variables stuck at a bound are shrunk out of the active set between
/// epochs. Convergence is only declared once a sweep over every variable has
/// a projected-gradient spread below `tol`.
fn train_binary(xs: &[Vec<f64>], ys: &[f64], params: &SvmParams, seed: u64) -> Vec<f64> {
    let n = xs.len();
    let d = xs[0].len();
    let q: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let (mut pg_max_old, mut pg_min_old) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut rng = seed::rng(seed);
    for epoch in 0..params.max_epochs {
        index[..active].shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut s = 0;
        while s < active {
            let i = index[s];
            let x = &xs[i];
            let margin = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d];
            let g = ys[i] * margin - 1.0;
            let pg = if alpha[i] <= 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                g.min(0.0)
            } else if alpha[i] >= params.c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, params.c);
                let delta = (alpha[i] - old) * ys[i];
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += delta * xj;
                }
                w[d] += delta;
            }
            s += 1;
        }
        if pg_max - pg_min < params.tol || active == 0 {
            if active == n {
                log::debug!("svm converged after {} epochs", epoch + 1);
                return w;
            }
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }
    log::warn!("svm reached {} epochs without converging", params.max_epochs);
    w
}

impl LinearSvm {
    pub fn fit(ds: &Dataset, params: &SvmParams, seed: u64) -> Result<Self> {
        if !(params.c > 0.0 && params.c.is_finite()) || !(params.tol > 0.0) || params.max_epochs == 0 {
            return Err(Error::Parameter("svm needs c > 0, tol > 0, max_epochs >= 1".into()));
        }
        let standardizer = Standardizer::fit(&ds.features);
        let xs: Vec<Vec<f64>> = ds.features.iter().map(|x| standardizer.transform(x)).collect();
        let weights = (0..ds.n_classes())
            .into_par_iter()
            .map(|c| {
                let ys: Vec<f64> = ds.labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                train_binary(&xs, &ys, params, seed::derive_index(seed, c as u64))
            })
            .collect();
        Ok(Self { standardizer, weights })
    }

    /// Per-class margins `w · z(x) + b`.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.standardizer.dim(), x)?;
        let z = self.standardizer.transform(x);
        Ok(self
            .weights
            .iter()
            .map(|w| z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[z.len()])
            .collect())
    }
}

impl Classifier for LinearSvm {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.decision_values(x)?))
    }
}

use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, softmax, Classifier};
use crate::dataset::Dataset;
use crate::error::Result;

/// Gaussian naive Bayes with per-class, per-dimension variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let (c, d) = (ds.n_classes(), ds.dim());
        let mut counts = vec![0usize; c];
        let mut means = vec![vec![0.0; d]; c];
        for (x, &l) in ds.features.iter().zip(&ds.labels) {
            counts[l] += 1;
            for (m, v) in means[l].iter_mut().zip(x) {
                *m += v;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            if n > 0 {
                m.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        let mut variances = vec![vec![0.0; d]; c];
        for (x, &l) in ds.features.iter().zip(&ds.labels) {
            for j in 0..d {
                variances[l][j] += (x[j] - means[l][j]).powi(2);
            }
        }
        for (v, &n) in variances.iter_mut().zip(&counts) {
            if n > 0 {
                v.iter_mut().for_each(|s| *s /= n as f64);
            }
        }
        // Variance floor relative to the widest feature over the whole set.
        let overall_max = (0..d)
            .map(|j| {
                let mean = ds.features.iter().map(|x| x[j]).sum::<f64>() / ds.len() as f64;
                ds.features.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / ds.len() as f64
            })
            .fold(0.0, f64::max);
        let floor = (1e-9 * overall_max).max(1e-300);
        variances.iter_mut().flatten().for_each(|v| *v = v.max(floor));
        let n = ds.len() as f64;
        Ok(Self {
            log_priors: counts
                .iter()
                .map(|&k| if k == 0 { f64::MIN } else { (k as f64 / n).ln() })
                .collect(),
            means,
            variances,
        })
    }

    /// `log P(c) + Σ_j log N(x_j; μ_cj, σ²_cj)` per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.means[0].len(), x)?;
        Ok(self
            .log_priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(lp, (mu, var))| {
                lp + x
                    .iter()
                    .zip(mu.iter().zip(var))
                    .map(|(v, (m, s2))| -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - m).powi(2) / (2.0 * s2))
                    .sum::<f64>()
            })
            .collect())
    }
}

impl Classifier for GaussianNb {
    fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.joint_log_likelihood(x)?))
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.joint_log_likelihood(x)?))
    }
}

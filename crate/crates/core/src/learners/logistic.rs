//! Multinomial logistic regression with an L2 penalty, fitted by gradient
//! descent with a backtracking (Armijo) line search.

use serde::{Deserialize, Serialize};

use super::{check_dim, softmax, Classifier};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1.0,
            grad_tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Mean negative log-likelihood plus `l2 / (2n) * ||W||²` (biases unpenalized)
/// over standardized rows. Parameters are laid out class-major as
/// `[w_c0 .. w_c(d-1), b_c]` for each class `c`.
#[derive(Debug, Clone)]
pub struct SoftmaxObjective {
    pub xs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub l2: f64,
}

impl SoftmaxObjective {
    pub fn n_params(&self) -> usize {
        self.n_classes * (self.xs[0].len() + 1)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_and_gradient(theta).0
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.xs[0].len();
        let stride = d + 1;
        let n = self.xs.len() as f64;
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        let mut logits = vec![0.0; self.n_classes];
        for (x, &y) in self.xs.iter().zip(&self.labels) {
            for (c, l) in logits.iter_mut().enumerate() {
                let w = &theta[c * stride..(c + 1) * stride];
                *l = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d];
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            loss += lse - logits[y];
            for c in 0..self.n_classes {
                let p = (logits[c] - lse).exp();
                let r = p - if c == y { 1.0 } else { 0.0 };
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj += r * xj;
                }
                g[d] += r;
            }
        }
        let mut penalty = 0.0;
        for c in 0..self.n_classes {
            for j in 0..d {
                let w = theta[c * stride + j];
                penalty += w * w;
                grad[c * stride + j] += self.l2 * w;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        ((loss + 0.5 * self.l2 * penalty) / n, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub standardizer: Standardizer,
    /// One `[w_0 .. w_{d-1}, bias]` row per class.
    pub weights: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticRegression {
    pub fn fit(ds: &Dataset, params: &LogisticParams) -> Result<Self> {
        if !(params.l2 >= 0.0 && params.l2.is_finite()) || params.max_iter == 0 {
            return Err(Error::Parameter(
                "logistic regression needs l2 >= 0 and max_iter >= 1".into(),
            ));
        }
        let standardizer = Standardizer::fit(&ds.features);
        let obj = SoftmaxObjective {
            xs: ds.features.iter().map(|x| standardizer.transform(x)).collect(),
            labels: ds.labels.clone(),
            n_classes: ds.n_classes(),
            l2: params.l2,
        };
        let mut theta = vec![0.0; obj.n_params()];
        let (mut f, mut g) = obj.value_and_gradient(&theta);
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iter {
            let gnorm2 = dot(&g, &g);
            if gnorm2.sqrt() < params.grad_tol {
                converged = true;
                break;
            }
            iterations += 1;
            // Armijo backtracking along the negative gradient.
            let mut accepted = None;
            while step > 1e-20 {
                let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
                let (fc, gc) = obj.value_and_gradient(&cand);
                if fc <= f - 1e-4 * step * gnorm2 {
                    accepted = Some((cand, fc, gc));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc, gc)) = accepted else {
                break;
            };
            // Barzilai-Borwein estimate seeds the next trial step.
            let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            step = if sy > 0.0 {
                (dot(&s, &s) / sy).clamp(1e-10, 1e10)
            } else {
                step * 2.0
            };
            theta = cand;
            f = fc;
            g = gc;
        }
        if !converged {
            log::warn!(
                "logistic regression stopped after {iterations} iterations with gradient norm {:.3e}",
                dot(&g, &g).sqrt()
            );
        }
        let stride = ds.dim() + 1;
        Ok(Self {
            standardizer,
            weights: theta.chunks(stride).map(<[f64]>::to_vec).collect(),
            iterations,
            converged,
        })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.standardizer.dim(), x)?;
        let z = self.standardizer.transform(x);
        Ok(self.weights.iter().map(|w| dot(&z, w) + w[z.len()]).collect())
    }
}

impl Classifier for LogisticRegression {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }
}

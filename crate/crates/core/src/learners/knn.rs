use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};

/// k-nearest neighbours on standardized features.
///
/// Distance ties go to the lower training row; vote ties go to the tied class
/// whose member is nearest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Knn {
    pub fn fit(ds: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > ds.len() {
            return Err(Error::Parameter(format!("k = {k} with {} training rows", ds.len())));
        }
        let standardizer = Standardizer::fit(&ds.features);
        Ok(Self {
            k,
            n_classes: ds.n_classes(),
            points: ds.features.iter().map(|x| standardizer.transform(x)).collect(),
            labels: ds.labels.clone(),
            standardizer,
        })
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.standardizer.dim(), x)?;
        let z = self.standardizer.transform(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by);
            dist.truncate(self.k);
        }
        dist.sort_by(by);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    fn votes(&self, neighbours: &[usize]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for &i in neighbours {
            votes[self.labels[i]] += 1;
        }
        votes
    }
}

impl Classifier for Knn {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let votes = self.votes(&self.neighbours(x)?);
        Ok(votes.iter().map(|&v| v as f64 / self.k as f64).collect())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        let nn = self.neighbours(x)?;
        let votes = self.votes(&nn);
        let top = *votes.iter().max().expect("at least one class");
        Ok(nn
            .iter()
            .map(|&i| self.labels[i])
            .find(|&l| votes[l] == top)
            .expect("a top-voted class has a member among the neighbours"))
    }
}

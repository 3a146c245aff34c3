//! Random forests and extremely randomized trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, SplitRule, TreeParams};
use super::{check_dim, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub split: SplitRule,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl ForestParams {
    pub fn random_forest() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            split: SplitRule::Best,
            max_depth: None,
            min_leaf: 1,
        }
    }

    /// Full sample per tree, random thresholds.
    pub fn extra_trees() -> Self {
        Self {
            bootstrap: false,
            split: SplitRule::Random,
            ..Self::random_forest()
        }
    }
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Hard-voting tree ensemble; scores are vote fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

impl Forest {
    pub fn fit(ds: &Dataset, params: &ForestParams, seed: u64) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::Parameter("forest needs at least one tree".into()));
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features: Some(params.max_features.resolve(ds.dim())),
            split: params.split,
        };
        let weights = vec![1.0; ds.len()];
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = seed::derive_index(seed, t as u64);
                let rows = if params.bootstrap {
                    bootstrap_indices(ds.len(), seed::derive_index(tree_seed, 0))
                } else {
                    (0..ds.len()).collect()
                };
                DecisionTree::fit_rows(
                    &ds.features,
                    &ds.labels,
                    &weights,
                    &rows,
                    ds.n_classes(),
                    &tree_params,
                    seed::derive_index(tree_seed, 1),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            n_classes: ds.n_classes(),
        })
    }

    pub fn votes(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.trees[0].n_features, x)?;
        let mut votes = vec![0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_unchecked(x)] += 1;
        }
        Ok(votes)
    }
}

impl Classifier for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.trees.len() as f64;
        Ok(self.votes(x)?.into_iter().map(|v| v as f64 / n).collect())
    }
}

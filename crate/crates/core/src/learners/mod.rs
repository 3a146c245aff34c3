//! Base classifiers and the common train/predict surface.

pub mod forest;
mod gnb;
mod knn;
mod logistic;
mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use forest::{Forest, ForestParams, MaxFeatures};
pub use gnb::GaussianNb;
pub use knn::Knn;
pub use logistic::{LogisticParams, LogisticRegression, SoftmaxObjective};
pub use svm::{LinearSvm, SvmParams};
pub use tree::{DecisionTree, SplitRule, TreeParams};

/// A trained model that maps a feature vector to per-class scores.
pub trait Classifier {
    fn n_classes(&self) -> usize;

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Class decision; defaults to the lowest-index argmax of the scores.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_scores(x)?))
    }
}

/// A training recipe. `seed` drives any randomness; equal seeds give equal models.
pub trait Estimator: Sync {
    type Model: Classifier + Send + Sync;

    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Self::Model>;
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape { expected, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite input feature".into()));
    }
    Ok(())
}

/// Serializable training recipe for every learner kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Svm(SvmParams),
    Knn { k: usize },
    Dtree(TreeParams),
    Gnb,
    Rforest(ForestParams),
    Logistic(LogisticParams),
    ExtraTrees(ForestParams),
}

impl LearnerSpec {
    pub fn svm(c: f64) -> Self {
        LearnerSpec::Svm(SvmParams {
            c,
            ..SvmParams::default()
        })
    }

    pub fn knn(k: usize) -> Self {
        LearnerSpec::Knn { k }
    }

    pub fn dtree() -> Self {
        LearnerSpec::Dtree(TreeParams::default())
    }

    pub fn rforest() -> Self {
        LearnerSpec::Rforest(ForestParams::random_forest())
    }

    pub fn extra_trees() -> Self {
        LearnerSpec::ExtraTrees(ForestParams::extra_trees())
    }

    pub fn logistic(l2: f64) -> Self {
        LearnerSpec::Logistic(LogisticParams {
            l2,
            ..LogisticParams::default()
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Svm(_) => "svm",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::Dtree(_) => "dtree",
            LearnerSpec::Gnb => "gnb",
            LearnerSpec::Rforest(_) => "rforest",
            LearnerSpec::Logistic(_) => "logistic",
            LearnerSpec::ExtraTrees(_) => "extra_trees",
        }
    }
}

impl Estimator for LearnerSpec {
    type Model = TrainedLearner;

    fn fit(&self, ds: &Dataset, seed: u64) -> Result<TrainedLearner> {
        Ok(match self {
            LearnerSpec::Svm(p) => TrainedLearner::Svm(LinearSvm::fit(ds, p, seed)?),
            LearnerSpec::Knn { k } => TrainedLearner::Knn(Knn::fit(ds, *k)?),
            LearnerSpec::Dtree(p) => TrainedLearner::Dtree(DecisionTree::fit(ds, p, seed)?),
            LearnerSpec::Gnb => TrainedLearner::Gnb(GaussianNb::fit(ds)?),
            LearnerSpec::Rforest(p) => TrainedLearner::Rforest(Forest::fit(ds, p, seed)?),
            LearnerSpec::Logistic(p) => TrainedLearner::Logistic(LogisticRegression::fit(ds, p)?),
            LearnerSpec::ExtraTrees(p) => TrainedLearner::ExtraTrees(Forest::fit(ds, p, seed)?),
        })
    }
}

/// Any trained base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TrainedLearner {
    Svm(LinearSvm),
    Knn(Knn),
    Dtree(DecisionTree),
    Gnb(GaussianNb),
    Rforest(Forest),
    Logistic(LogisticRegression),
    ExtraTrees(Forest),
}

impl TrainedLearner {
    /// False for scores that are a softmax of margins rather than probabilities.
    pub fn calibrated(&self) -> bool {
        !matches!(self, TrainedLearner::Svm(_))
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedLearner::Svm(m) => m,
            TrainedLearner::Knn(m) => m,
            TrainedLearner::Dtree(m) => m,
            TrainedLearner::Gnb(m) => m,
            TrainedLearner::Rforest(m) | TrainedLearner::ExtraTrees(m) => m,
            TrainedLearner::Logistic(m) => m,
        }
    }
}

impl Classifier for TrainedLearner {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict_scores(x)
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.inner().predict(x)
    }
}

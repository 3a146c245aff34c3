//! The serializable model tree and the method identifiers that build it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::ensembles::{
    default_committee, train_adaboost_m1, train_bagging, train_stacking, train_voting, AdaBoost, AdaBoostParams,
    Stacking, Voting,
};
use crate::error::{Error, Result};
use crate::learners::{Classifier, Estimator, LearnerSpec, TrainedLearner};

/// Every trainable method exposed by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Voting,
    Bagging,
    Boosting,
    StackingLr,
    StackingRf,
    StackingEt,
    Svm,
    Knn,
    Dtree,
    Gnb,
    Rforest,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Voting,
        Method::Bagging,
        Method::Boosting,
        Method::StackingLr,
        Method::StackingRf,
        Method::StackingEt,
        Method::Svm,
        Method::Knn,
        Method::Dtree,
        Method::Gnb,
        Method::Rforest,
    ];

    pub const BASE: [Method; 5] = [Method::Svm, Method::Knn, Method::Dtree, Method::Gnb, Method::Rforest];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Voting => "voting",
            Method::Bagging => "bagging",
            Method::Boosting => "boosting",
            Method::StackingLr => "stacking-lr",
            Method::StackingRf => "stacking-rf",
            Method::StackingEt => "stacking-et",
            Method::Svm => "svm",
            Method::Knn => "knn",
            Method::Dtree => "dtree",
            Method::Gnb => "gnb",
            Method::Rforest => "rforest",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self, params: &MethodParams) -> String {
        match self {
            Method::Voting => "Voting".into(),
            Method::Bagging => "Bagging".into(),
            Method::Boosting => "Boosting (AdaBoost.M1)".into(),
            Method::StackingLr => "Stacking (Logistic Regression)".into(),
            Method::StackingRf => "Stacking (Random Forest)".into(),
            Method::StackingEt => "Stacking (Extra Tree)".into(),
            Method::Svm => "SVM".into(),
            Method::Knn => format!("k-NN (k={})", params.knn_k),
            Method::Dtree => "Decision Tree".into(),
            Method::Gnb => "Naive Bayes".into(),
            Method::Rforest => "Random Forest".into(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method `{s}`")))
    }
}

/// Hyperparameters for every method; defaults follow the documented choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub svm_c: f64,
    pub knn_k: usize,
    pub tree_max_depth: Option<usize>,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub bagging_bags: usize,
    /// Base method resampled by bagging; must be a single learner.
    pub bagging_base: Method,
    pub boost_rounds: usize,
    pub boost_depth: usize,
    pub lr_l2: f64,
    pub stacking_folds: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            svm_c: 0.02,
            knn_k: 3,
            tree_max_depth: None,
            tree_min_leaf: 1,
            forest_trees: 100,
            bagging_bags: 50,
            bagging_base: Method::Dtree,
            boost_rounds: 50,
            boost_depth: 5,
            lr_l2: 1.0,
            stacking_folds: 5,
        }
    }
}

impl MethodParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::Config("svm_c must be > 0".into()));
        }
        if !(3..=5).contains(&self.knn_k) {
            return Err(Error::Config("knn_k must be 3, 4 or 5".into()));
        }
        if self.tree_min_leaf == 0 || self.forest_trees == 0 || self.bagging_bags == 0 || self.boost_rounds == 0 {
            return Err(Error::Config(
                "tree_min_leaf, forest_trees, bagging_bags and boost_rounds must be >= 1".into(),
            ));
        }
        if self.boost_depth == 0 || self.tree_max_depth == Some(0) {
            return Err(Error::Config("tree depths must be >= 1".into()));
        }
        if !(self.lr_l2 >= 0.0 && self.lr_l2.is_finite()) {
            return Err(Error::Config("lr_l2 must be >= 0".into()));
        }
        if self.base_spec(self.bagging_base).is_none() {
            return Err(Error::Config(format!(
                "bagging_base must be a single learner, not `{}`",
                self.bagging_base
            )));
        }
        if self.stacking_folds < 2 {
            return Err(Error::Config("stacking_folds must be >= 2".into()));
        }
        Ok(())
    }

    fn tree(&self) -> LearnerSpec {
        LearnerSpec::Dtree(crate::learners::TreeParams {
            max_depth: self.tree_max_depth,
            min_leaf: self.tree_min_leaf,
            ..Default::default()
        })
    }

    fn forest(&self) -> LearnerSpec {
        LearnerSpec::Rforest(crate::learners::ForestParams {
            n_trees: self.forest_trees,
            ..crate::learners::ForestParams::random_forest()
        })
    }

    /// SVM, k-NN, tree, naive Bayes, forest with this parameter set.
    pub fn committee(&self) -> Vec<LearnerSpec> {
        let mut c = default_committee();
        c[0] = LearnerSpec::svm(self.svm_c);
        c[1] = LearnerSpec::knn(self.knn_k);
        c[2] = self.tree();
        c[4] = self.forest();
        c
    }

    pub fn base_spec(&self, method: Method) -> Option<LearnerSpec> {
        match method {
            Method::Svm => Some(LearnerSpec::svm(self.svm_c)),
            Method::Knn => Some(LearnerSpec::knn(self.knn_k)),
            Method::Dtree => Some(self.tree()),
            Method::Gnb => Some(LearnerSpec::Gnb),
            Method::Rforest => Some(self.forest()),
            _ => None,
        }
    }
}

/// A trained model of any method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Model {
    Learner(TrainedLearner),
    Voting(Voting<TrainedLearner>),
    Bagging(Voting<TrainedLearner>),
    Boosting(AdaBoost),
    Stacking(Stacking<TrainedLearner, TrainedLearner>),
}

impl Model {
    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Learner(m) => m,
            Model::Voting(m) | Model::Bagging(m) => m,
            Model::Boosting(m) => m,
            Model::Stacking(m) => m,
        }
    }
}

impl Classifier for Model {
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

/// Trains `method` on `ds`.
pub fn train_method(method: Method, ds: &Dataset, params: &MethodParams, seed: u64) -> Result<Model> {
    params.validate()?;
    if let Some(spec) = params.base_spec(method) {
        return Ok(Model::Learner(spec.fit(ds, seed)?));
    }
    let committee = params.committee();
    Ok(match method {
        Method::Voting => Model::Voting(train_voting(ds, &committee, seed)?),
        Method::Bagging => {
            let base = params.base_spec(params.bagging_base).expect("validated above");
            Model::Bagging(train_bagging(ds, &base, params.bagging_bags, seed)?)
        }
        Method::Boosting => Model::Boosting(train_adaboost_m1(
            ds,
            &AdaBoostParams {
                rounds: params.boost_rounds,
                base: crate::learners::TreeParams::with_max_depth(params.boost_depth),
            },
            seed,
        )?),
        Method::StackingLr | Method::StackingRf | Method::StackingEt => {
            let meta = match method {
                Method::StackingLr => LearnerSpec::logistic(params.lr_l2),
                Method::StackingRf => params.forest(),
                _ => LearnerSpec::ExtraTrees(crate::learners::ForestParams {
                    n_trees: params.forest_trees,
                    ..crate::learners::ForestParams::extra_trees()
                }),
            };
            let (model, _) = train_stacking(ds, &committee, &meta, params.stacking_folds, seed)?;
            Model::Stacking(model)
        }
        _ => unreachable!("base methods handled above"),
    })
}

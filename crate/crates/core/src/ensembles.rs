//! Voting, bagging, AdaBoost.M1 and stacking over the base learners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::kfold_rows;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::forest::bootstrap_indices;
use crate::learners::{argmax, check_dim, Classifier, DecisionTree, Estimator, LearnerSpec, TreeParams};
use crate::seed;

/// The default committee: SVM (C = 0.02), 3-NN, decision tree, Gaussian NB,
/// random forest, in that order.
pub fn default_committee() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::svm(0.02),
        LearnerSpec::knn(3),
        LearnerSpec::dtree(),
        LearnerSpec::Gnb,
        LearnerSpec::rforest(),
    ]
}

fn fit_members<E: Estimator>(ds: &Dataset, committee: &[E], seed: u64) -> Result<Vec<E::Model>> {
    if committee.len() < 2 {
        return Err(Error::Parameter("a committee needs at least two members".into()));
    }
    committee
        .par_iter()
        .enumerate()
        .map(|(i, e)| e.fit(ds, seed::derive_index(seed, i as u64)))
        .collect()
}

/// Plurality vote. Ties go to the largest summed member score among the tied
/// classes, then to the lowest class id. Scores are vote fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Voting<M> {
    pub members: Vec<M>,
    pub n_classes: usize,
}

impl<M: Classifier> Voting<M> {
    fn tally(&self, x: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut votes = vec![0; self.n_classes];
        let mut summed = vec![0.0; self.n_classes];
        for m in &self.members {
            let scores = m.predict_scores(x)?;
            votes[m.predict(x)?] += 1;
            for (s, v) in summed.iter_mut().zip(&scores) {
                *s += v;
            }
        }
        Ok((votes, summed))
    }
}

/// Applies the voting tie rule to precomputed tallies.
pub fn resolve_vote(votes: &[usize], summed_scores: &[f64]) -> usize {
    let top = *votes.iter().max().expect("non-empty tally");
    let mut best: Option<usize> = None;
    for c in (0..votes.len()).filter(|&c| votes[c] == top) {
        if best.is_none_or(|b| summed_scores[c] > summed_scores[b]) {
            best = Some(c);
        }
    }
    best.expect("some class holds the top count")
}

impl<M: Classifier> Classifier for Voting<M> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (votes, _) = self.tally(x)?;
        let n = self.members.len() as f64;
        Ok(votes.into_iter().map(|v| v as f64 / n).collect())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        let (votes, summed) = self.tally(x)?;
        Ok(resolve_vote(&votes, &summed))
    }
}

/// Trains every committee member on the full set.
pub fn train_voting<E: Estimator>(ds: &Dataset, committee: &[E], seed: u64) -> Result<Voting<E::Model>> {
    Ok(Voting {
        members: fit_members(ds, committee, seed)?,
        n_classes: ds.n_classes(),
    })
}

/// Seed of bag `b`'s bootstrap draw.
pub fn bag_seed(seed: u64, bag: usize) -> u64 {
    seed::derive_index(seed::derive_index(seed, bag as u64), 0)
}

/// One base learner per bootstrap resample, combined with the voting rule.
pub fn train_bagging<E: Estimator>(ds: &Dataset, base: &E, n_bags: usize, seed: u64) -> Result<Voting<E::Model>> {
    if n_bags == 0 {
        return Err(Error::Parameter("bagging needs at least one bag".into()));
    }
    let members = (0..n_bags)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_indices(ds.len(), bag_seed(seed, b));
            base.fit(
                &ds.select(&rows)?,
                seed::derive_index(seed::derive_index(seed, b as u64), 1),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Voting {
        members,
        n_classes: ds.n_classes(),
    })
}

/// β used when a round classifies the weighted training set perfectly.
pub const BETA_FLOOR: f64 = 1e-10;

/// Vote weight `ln(1/β)` of a round with weighted error `error`.
pub fn member_weight(error: f64) -> f64 {
    let beta = (error / (1.0 - error)).max(BETA_FLOOR);
    (1.0 / beta).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub error: f64,
    pub beta: f64,
    /// Sum of instance weights after this round's update and renormalization.
    pub weight_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub rounds: usize,
    pub base: TreeParams,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            rounds: 50,
            base: TreeParams::with_max_depth(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub members: Vec<DecisionTree>,
    /// `ln(1/β_t)` per retained round.
    pub alphas: Vec<f64>,
    pub rounds: Vec<BoostRound>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl AdaBoost {
    fn class_totals(&self, x: &[f64], upto: usize) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_classes];
        for (m, a) in self.members.iter().zip(&self.alphas).take(upto) {
            totals[m.predict_unchecked(x)] += a;
        }
        totals
    }

    /// Prediction using only the first `rounds` members.
    pub fn predict_truncated(&self, x: &[f64], rounds: usize) -> Result<usize> {
        check_dim(self.n_features, x)?;
        Ok(argmax(&self.class_totals(x, rounds)))
    }
}

impl Classifier for AdaBoost {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        let totals = self.class_totals(x, self.members.len());
        let sum: f64 = totals.iter().sum();
        Ok(totals.into_iter().map(|t| t / sum).collect())
    }
}

/// AdaBoost.M1 with weighted decision trees.
///
/// A round whose weighted error reaches 0.5 ends training (and is discarded);
/// on the first round that is a failure. A perfect round is kept with β
/// capped at [`BETA_FLOOR`] and ends training.
pub fn train_adaboost_m1(ds: &Dataset, params: &AdaBoostParams, seed: u64) -> Result<AdaBoost> {
    if params.rounds == 0 {
        return Err(Error::Parameter("boosting needs at least one round".into()));
    }
    let n = ds.len();
    let rows: Vec<usize> = (0..n).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoost {
        members: Vec::new(),
        alphas: Vec::new(),
        rounds: Vec::new(),
        n_classes: ds.n_classes(),
        n_features: ds.dim(),
    };
    for round in 1..=params.rounds {
        let tree = DecisionTree::fit_rows(
            &ds.features,
            &ds.labels,
            &w,
            &rows,
            ds.n_classes(),
            &params.base,
            seed::derive_index(seed, round as u64),
        )?;
        let correct: Vec<bool> = ds
            .features
            .iter()
            .zip(&ds.labels)
            .map(|(x, &y)| tree.predict_unchecked(x) == y)
            .collect();
        let error: f64 = w.iter().zip(&correct).filter(|(_, &c)| !c).map(|(wi, _)| wi).sum();
        if error >= 0.5 {
            if round == 1 {
                return Err(Error::BoostFailed { round, error });
            }
            log::debug!("boosting stopped at round {round}: error {error:.4}");
            break;
        }
        let beta = (error / (1.0 - error)).max(BETA_FLOOR);
        model.members.push(tree);
        model.alphas.push((1.0 / beta).ln());
        if error <= 0.0 {
            model.rounds.push(BoostRound {
                error,
                beta,
                weight_sum: w.iter().sum(),
            });
            break;
        }
        for (wi, &c) in w.iter_mut().zip(&correct) {
            if c {
                *wi *= beta;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        model.rounds.push(BoostRound {
            error,
            beta,
            weight_sum: w.iter().sum(),
        });
    }
    Ok(model)
}

/// Column layout of stacking meta-features: the original features followed
/// by each member's class-score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaLayout {
    pub n_original: usize,
    pub n_members: usize,
    pub n_classes: usize,
}

impl MetaLayout {
    pub fn width(&self) -> usize {
        self.n_original + self.n_members * self.n_classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stacking<M, T> {
    pub members: Vec<M>,
    pub meta: T,
    pub layout: MetaLayout,
}

/// Which rows trained and which rows were scored in each internal fold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StackingAudit {
    pub folds: Vec<crate::corpus::Fold>,
}

impl StackingAudit {
    /// Rows whose out-of-fold scores came from a model that saw their group.
    pub fn leakage_violations(&self, groups: &[String]) -> usize {
        let mut violations = 0;
        for f in &self.folds {
            let seen: std::collections::BTreeSet<&str> = f.train.iter().map(|&i| groups[i].as_str()).collect();
            violations += f
                .validation
                .iter()
                .filter(|&&i| seen.contains(groups[i].as_str()))
                .count();
        }
        violations
    }
}

fn meta_row<M: Classifier>(x: &[f64], members: &[M]) -> Result<Vec<f64>> {
    let mut row = x.to_vec();
    for m in members {
        row.extend(m.predict_scores(x)?);
    }
    Ok(row)
}

impl<M: Classifier, T: Classifier> Stacking<M, T> {
    pub fn meta_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.layout.n_original, x)?;
        meta_row(x, &self.members)
    }
}

impl<M: Classifier, T: Classifier> Classifier for Stacking<M, T> {
    fn n_classes(&self) -> usize {
        self.layout.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.meta.predict_scores(&self.meta_features(x)?)
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.meta.predict(&self.meta_features(x)?)
    }
}

pub type StackingFit<M, T> = (Stacking<M, T>, StackingAudit);

/// Out-of-fold stacking. Members are trained on `k - 1` group-aware folds to
/// score the held-out fold; the meta-learner is fitted on original features
/// plus those scores, and the members are refitted on all rows for inference.
pub fn train_stacking<E: Estimator, F: Estimator>(
    ds: &Dataset,
    committee: &[E],
    meta: &F,
    folds: usize,
    seed: u64,
) -> Result<StackingFit<E::Model, F::Model>> {
    if committee.is_empty() {
        return Err(Error::Parameter("stacking needs at least one member".into()));
    }
    let names = ds.class_names_of_rows();
    let rows: Vec<(usize, &str, &str)> = (0..ds.len()).map(|i| (i, names[i], ds.groups[i].as_str())).collect();
    let plan = kfold_rows(&rows, folds, seed::derive_index(seed, 0xF01D))?;
    let layout = MetaLayout {
        n_original: ds.dim(),
        n_members: committee.len(),
        n_classes: ds.n_classes(),
    };
    let mut meta_x: Vec<Vec<f64>> = vec![Vec::new(); ds.len()];
    let per_fold = plan
        .par_iter()
        .enumerate()
        .map(|(fi, fold)| {
            let train = ds.select(&fold.train)?;
            let fold_seed = seed::derive_index(seed, 1 + fi as u64);
            let members = committee
                .iter()
                .enumerate()
                .map(|(i, e)| e.fit(&train, seed::derive_index(fold_seed, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            fold.validation
                .iter()
                .map(|&r| Ok((r, meta_row(&ds.features[r], &members)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for (r, row) in per_fold.into_iter().flatten() {
        meta_x[r] = row;
    }
    let meta_ds = Dataset::new(meta_x, ds.labels.clone(), ds.groups.clone(), ds.class_names.clone())?;
    let meta_model = meta.fit(&meta_ds, seed::derive_index(seed, 0x3E7A))?;
    let members = committee
        .iter()
        .enumerate()
        .map(|(i, e)| e.fit(ds, seed::derive_index(seed, 0x1000 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Stacking {
            members,
            meta: meta_model,
            layout,
        },
        StackingAudit { folds: plan },
    ))
}

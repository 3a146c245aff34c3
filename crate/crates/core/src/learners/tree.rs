//! CART classification trees on weighted Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// How thresholds are chosen for a candidate feature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Every midpoint between consecutive distinct values.
    #[default]
    Best,
    /// One threshold drawn uniformly in `[min, max)` of the node's values.
    Random,
    /// One threshold at `(min + max) / 2`.
    Midrange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features sampled per node; `None` considers all of them.
    pub max_features: Option<usize>,
    pub split: SplitRule,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
            split: SplitRule::Best,
        }
    }
}

impl TreeParams {
    pub fn with_max_depth(depth: usize) -> Self {
        Self {
            max_depth: Some(depth),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Normalized class weights of the training rows reaching the leaf.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub n_features: usize,
}

/// Chosen split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// `Σ_child weight * gini(child)`.
    pub impurity: f64,
}

/// `weight * (1 - Σ p_c²)` for a node holding class weights `dist`.
pub fn weighted_gini(dist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        0.0
    } else {
        total - dist.iter().map(|c| c * c).sum::<f64>() / total
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    params: &'a TreeParams,
    rng: seed::Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_classes];
        for &r in rows {
            dist[self.y[r]] += self.w[r];
        }
        dist
    }

    fn leaf(&mut self, dist: Vec<f64>) -> usize {
        let total: f64 = dist.iter().sum();
        let distribution = if total > 0.0 {
            dist.iter().map(|c| c / total).collect()
        } else {
            vec![1.0 / self.n_classes as f64; self.n_classes]
        };
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn best_threshold(&self, rows: &[usize], feature: usize, total: f64, eps: f64) -> Option<SplitChoice> {
        let mut sorted: Vec<usize> = rows.to_vec();
        sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
        let mut left = vec![0.0; self.n_classes];
        let mut right = self.class_weights(rows);
        let mut left_w = 0.0;
        let mut best: Option<SplitChoice> = None;
        let min_leaf = self.params.min_leaf;
        for i in 0..sorted.len() - 1 {
            let r = sorted[i];
            left[self.y[r]] += self.w[r];
            right[self.y[r]] -= self.w[r];
            left_w += self.w[r];
            let (v, next) = (self.x[r][feature], self.x[sorted[i + 1]][feature]);
            if v == next || i + 1 < min_leaf || sorted.len() - i - 1 < min_leaf {
                continue;
            }
            let impurity = weighted_gini(&left, left_w) + weighted_gini(&right, total - left_w);
            if best.is_none_or(|b| impurity < b.impurity - eps) {
                let mid = v + (next - v) / 2.0;
                best = Some(SplitChoice {
                    feature,
                    threshold: if mid < next { mid } else { v },
                    impurity,
                });
            }
        }
        best
    }

    fn single_threshold(&mut self, rows: &[usize], feature: usize) -> Option<SplitChoice> {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(self.x[r][feature]), hi.max(self.x[r][feature]))
        });
        if lo >= hi {
            return None;
        }
        let threshold = match self.params.split {
            SplitRule::Random => self.rng.gen_range(lo..hi),
            _ => {
                let mid = lo + (hi - lo) / 2.0;
                if mid < hi {
                    mid
                } else {
                    lo
                }
            }
        };
        let mut left = vec![0.0; self.n_classes];
        let mut right = vec![0.0; self.n_classes];
        let mut n_left = 0;
        for &r in rows {
            if self.x[r][feature] <= threshold {
                left[self.y[r]] += self.w[r];
                n_left += 1;
            } else {
                right[self.y[r]] += self.w[r];
            }
        }
        if n_left < self.params.min_leaf || rows.len() - n_left < self.params.min_leaf {
            return None;
        }
        let (lw, rw) = (left.iter().sum(), right.iter().sum());
        Some(SplitChoice {
            feature,
            threshold,
            impurity: weighted_gini(&left, lw) + weighted_gini(&right, rw),
        })
    }

    fn choose(&mut self, rows: &[usize], candidates: &[usize], total: f64) -> Option<SplitChoice> {
        let eps = 1e-12 * total.max(1.0);
        let mut best: Option<SplitChoice> = None;
        for &f in candidates {
            let found = match self.params.split {
                SplitRule::Best => self.best_threshold(rows, f, total, eps),
                SplitRule::Random | SplitRule::Midrange => self.single_threshold(rows, f),
            };
            if let Some(s) = found {
                if best.is_none_or(|b| s.impurity < b.impurity - eps) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn find_split(&mut self, rows: &[usize], total: f64) -> Option<SplitChoice> {
        let d = self.x[0].len();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(&mut self.rng);
                let mut primary = order[..m.max(1)].to_vec();
                primary.sort_unstable();
                if let Some(s) = self.choose(rows, &primary, total) {
                    return Some(s);
                }
                // Keep drawing features until one admits a split.
                for &f in &order[m.max(1)..] {
                    if let Some(s) = self.choose(rows, &[f], total) {
                        return Some(s);
                    }
                }
                None
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                self.choose(rows, &all, total)
            }
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let dist = self.class_weights(&rows);
        let total: f64 = dist.iter().sum();
        let pure = dist.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || rows.len() < 2 * self.params.min_leaf.max(1) {
            return self.leaf(dist);
        }
        let Some(split) = self.find_split(&rows, total) else {
            return self.leaf(dist);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][split.feature] <= split.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

impl DecisionTree {
    pub fn fit(ds: &Dataset, params: &TreeParams, seed: u64) -> Result<Self> {
        let rows: Vec<usize> = (0..ds.len()).collect();
        let w = vec![1.0; ds.len()];
        Self::fit_rows(&ds.features, &ds.labels, &w, &rows, ds.n_classes(), params, seed)
    }

    /// Fits on `rows` (duplicates allowed) of a shared matrix with per-row weights.
    pub fn fit_rows(
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        rows: &[usize],
        n_classes: usize,
        params: &TreeParams,
        seed: u64,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("no rows to fit a tree on".into()));
        }
        if params.min_leaf == 0 || params.max_features == Some(0) {
            return Err(Error::Parameter("min_leaf and max_features must be >= 1".into()));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter("sample weights must be finite and >= 0".into()));
        }
        let mut b = Builder {
            x,
            y,
            w,
            n_classes,
            params,
            rng: seed::rng(seed),
            nodes: Vec::new(),
        };
        b.build(rows.to_vec(), 0);
        Ok(Self {
            nodes: b.nodes,
            n_classes,
            n_features: x[0].len(),
        })
    }

    /// Depth of the deepest leaf; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction without input validation, for ensemble inner loops.
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        argmax(self.leaf_for(x))
    }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        Ok(self.leaf_for(x).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: Vec<Vec<f64>>, y: Vec<usize>, c: usize) -> Dataset {
        Dataset::ungrouped(x, y, c).unwrap()
    }

    #[test]
    fn pure_node_is_a_single_leaf() {
        let mut d = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 1], 2);
        d.class_names = vec!["a".into(), "b".into()];
        let t = DecisionTree::fit(&d, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[5.0]).unwrap(), 1);
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = ds(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            2,
        );
        let t = DecisionTree::fit(&d, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.root_split(), Some((0, 0.5)));
        for (x, &y) in d.features.iter().zip(&d.labels) {
            assert_eq!(t.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn depth_limit_and_leaf_majority_tie() {
        let d = ds(vec![vec![0.0], vec![1.0]], vec![1, 0], 2);
        let t = DecisionTree::fit(&d, &TreeParams::with_max_depth(0), 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        // Equal weights: lower class id.
        assert_eq!(t.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 1], 2);
        let p = TreeParams {
            min_leaf: 2,
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&d, &p, 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn weights_shift_the_split() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![0, 1, 0];
        let p = TreeParams::with_max_depth(1);
        let heavy = DecisionTree::fit_rows(&x, &y, &[1.0, 10.0, 1.0], &[0, 1, 2], 2, &p, 0).unwrap();
        assert_eq!(heavy.predict(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn midrange_rule_on_four_points() {
        let d = ds(
            vec![vec![0.0, 5.0], vec![1.0, 6.0], vec![2.0, 9.0], vec![3.0, 10.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let p = TreeParams {
            split: SplitRule::Midrange,
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&d, &p, 0).unwrap();
        // Both features separate perfectly at their midrange; feature 0 wins the tie.
        assert_eq!(t.root_split(), Some((0, 1.5)));
    }
}

//! Brute-force oracles shared by the learner tests and the acceptance suite.
#![allow(dead_code)]

use mispro::dataset::Dataset;
use mispro::learners::tree::{weighted_gini, Node};
use mispro::learners::{DecisionTree, SoftmaxObjective, TreeParams};
use mispro::seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_blobs(n: usize, d: usize, c: usize, spread: f64, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let centres: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = i % c;
        x.push(
            centres[label]
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + spread * z
                })
                .collect(),
        );
        y.push(label);
    }
    Dataset::ungrouped(x, y, c).unwrap()
}

pub fn standardize(train: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = train.len() as f64;
    (0..x.len())
        .map(|j| {
            let mean = train.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (train.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            (x[j] - mean) / sd
        })
        .collect()
}

/// Brute force: sort every training row by distance, take k, majority vote
/// with the nearest tied class winning.
pub fn knn_oracle(ds: &Dataset, k: usize, q: &[f64]) -> usize {
    let zq = standardize(&ds.features, q);
    let mut all: Vec<(f64, usize)> = ds
        .features
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let z = standardize(&ds.features, r);
            (z.iter().zip(&zq).map(|(a, b)| (a - b).powi(2)).sum(), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let near = &all[..k];
    let mut votes = vec![0; ds.n_classes()];
    for &(_, i) in near {
        votes[ds.labels[i]] += 1;
    }
    let top = *votes.iter().max().unwrap();
    near.iter()
        .map(|&(_, i)| ds.labels[i])
        .find(|&l| votes[l] == top)
        .unwrap()
}

/// Lowest child impurity over every feature and every midpoint between
/// consecutive distinct values of the node's rows.
pub fn best_split_impurity(ds: &Dataset, rows: &[usize]) -> Option<f64> {
    let c = ds.n_classes();
    let mut best: Option<f64> = None;
    for j in 0..ds.dim() {
        let mut values: Vec<f64> = rows.iter().map(|&r| ds.features[r][j]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let (mut l, mut r) = (vec![0.0; c], vec![0.0; c]);
            for &i in rows {
                if ds.features[i][j] <= t {
                    l[ds.labels[i]] += 1.0;
                } else {
                    r[ds.labels[i]] += 1.0;
                }
            }
            let imp = weighted_gini(&l, l.iter().sum()) + weighted_gini(&r, r.iter().sum());
            best = Some(best.map_or(imp, |b: f64| b.min(imp)));
        }
    }
    best
}

pub fn check_node(tree: &DecisionTree, ds: &Dataset, node: usize, rows: Vec<usize>) {
    let c = ds.n_classes();
    let mut dist = vec![0.0; c];
    rows.iter().for_each(|&r| dist[ds.labels[r]] += 1.0);
    let node_imp = weighted_gini(&dist, rows.len() as f64);
    match &tree.nodes[node] {
        Node::Leaf { .. } => {
            let gain = best_split_impurity(ds, &rows).map_or(0.0, |b| node_imp - b);
            assert!(
                node_imp < 1e-12 || gain <= 1e-12,
                "leaf with an improving split left unmade"
            );
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let (lr, rr): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| ds.features[r][*feature] <= *threshold);
            assert!(!lr.is_empty() && !rr.is_empty());
            let (mut l, mut r) = (vec![0.0; c], vec![0.0; c]);
            lr.iter().for_each(|&i| l[ds.labels[i]] += 1.0);
            rr.iter().for_each(|&i| r[ds.labels[i]] += 1.0);
            let chosen = weighted_gini(&l, lr.len() as f64) + weighted_gini(&r, rr.len() as f64);
            let oracle = best_split_impurity(ds, &rows).expect("split node without candidate");
            assert!((chosen - oracle).abs() < 1e-9, "chosen {chosen} vs exhaustive {oracle}");
            check_node(tree, ds, *left, lr);
            check_node(tree, ds, *right, rr);
        }
    }
}

/// Random small problem (n <= 30, d <= 4) on a coarse grid so that ties
/// and repeated values occur; every node is checked against enumeration.
pub fn tree_matches_enumeration(s: u64) {
    let mut rng = seed::rng(s);
    let n = rng.gen_range(6..=30);
    let d = rng.gen_range(1..=4);
    let c = rng.gen_range(2..=3);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| (rng.gen_range(0..8) as f64) * 0.5).collect())
        .collect();
    let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    y[..c].iter_mut().enumerate().for_each(|(i, l)| *l = i);
    let ds = Dataset::ungrouped(x, y, c).unwrap();
    let tree = DecisionTree::fit(&ds, &TreeParams::default(), s).unwrap();
    check_node(&tree, &ds, 0, (0..n).collect());
}

/// Largest relative gap between the analytic gradient and central
/// differences at a few random points.
pub fn logistic_gradient_gap(s: u64) -> f64 {
    let ds = gaussian_blobs(60, 5, 3, 1.0, s);
    let obj = SoftmaxObjective {
        xs: ds.features.clone(),
        labels: ds.labels.clone(),
        n_classes: 3,
        l2: 0.7,
    };
    let mut rng = seed::rng(s ^ 0xABCD);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..obj.n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, grad) = obj.value_and_gradient(&theta);
        for i in 0..theta.len() {
            let h = 1e-6;
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-3));
        }
    }
    worst
}

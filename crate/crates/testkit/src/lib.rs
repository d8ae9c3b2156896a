//! Reference implementations and generators for testing `exiffi-core`.
//!
//! The oracles are deliberately naive: node populations are recomputed by
//! routing the training subsample through each tree, metrics are evaluated
//! from their textbook definitions in O(n^2), and `c(n)` is an explicit
//! harmonic sum. None of them reuse the counts or helpers of the fast path.

use std::fmt;

use exiffi_core::{Dataset, Forest, ImportanceVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sum_{i=1..n} 1/i`, summed from the small terms upwards.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// Average unsuccessful-search path length of a BST with `n` keys.
pub fn oracle_harmonic_c(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n as f64 - 1.0) / n as f64,
    }
}

fn side(normal: &[f64], intercept: &[f64], x: &[f64]) -> bool {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for j in 0..normal.len() {
        lhs += normal[j] * x[j];
        rhs += normal[j] * intercept[j];
    }
    lhs > rhs
}

/// One tree reduced to its hyperplanes; counts are never read from it.
struct OracleTree {
    /// `(normal, intercept, left, right)` for internal nodes, `None` at leaves.
    nodes: Vec<Option<(Vec<f64>, Vec<f64>, usize, usize)>>,
    depth: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl OracleTree {
    /// Node indices on the path of `x`, root first.
    fn route(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut at = 0;
        while let Some((v, p, l, r)) = &self.nodes[at] {
            at = if side(v, p, x) { *l } else { *r };
            path.push(at);
        }
        path
    }

    /// Subsample rows whose path passes through `node`.
    fn population(&self, node: usize) -> Vec<&[f64]> {
        self.rows
            .iter()
            .filter(|r| self.route(r).contains(&node))
            .map(|r| r.as_slice())
            .collect()
    }
}

/// The forest and the training data handed to [`OracleForest::new`] do not
/// belong together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingError(pub String);

impl fmt::Display for PairingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "forest/data pairing error: {}", self.0)
    }
}

impl std::error::Error for PairingError {}

/// Brute-force view of a fitted forest.
pub struct OracleForest {
    trees: Vec<OracleTree>,
    n_features: usize,
    psi: usize,
}

impl OracleForest {
    /// Copies the hyperplanes of `f` and the training rows each tree was
    /// grown on. `train` must be the dataset `f` was fitted on.
    pub fn new(f: &Forest<f64>, train: &Dataset<f64>) -> Result<Self, PairingError> {
        if train.n_features() != f.n_features() {
            return Err(PairingError(format!(
                "forest has {} features, data {}",
                f.n_features(),
                train.n_features()
            )));
        }
        for (t, tree) in f.trees().iter().enumerate() {
            if tree.subsample().iter().any(|&i| i >= train.n_samples()) {
                return Err(PairingError(format!("tree {t} indexes rows beyond the data")));
            }
            if tree.subsample().len() != tree.root().n_node() {
                return Err(PairingError(format!("tree {t} root count differs from its subsample")));
            }
        }
        let trees = f
            .trees()
            .iter()
            .map(|t| OracleTree {
                nodes: t
                    .nodes()
                    .iter()
                    .map(|n| {
                        n.split().map(|s| {
                            (s.normal().to_vec(), s.intercept().to_vec(), s.left(), s.right())
                        })
                    })
                    .collect(),
                depth: t.nodes().iter().map(|n| n.depth()).collect(),
                rows: t.subsample().iter().map(|&i| train.row(i).to_vec()).collect(),
            })
            .collect();
        Ok(OracleForest {
            trees,
            n_features: f.n_features(),
            psi: f.sample_size(),
        })
    }

    /// `I`, `V` and `LFI` with every population recounted.
    pub fn importance(&self, x: &[f64]) -> ImportanceVector<f64> {
        let p = self.n_features;
        let mut raw = vec![0.0; p];
        let mut norm = vec![0.0; p];
        for tree in &self.trees {
            let path = tree.route(x);
            for w in path.windows(2) {
                let (node, child) = (w[0], w[1]);
                let n_node = tree.population(node).len() as f64;
                let n_side = tree.population(child).len() as f64;
                let (v, _, _, _) = tree.nodes[node].as_ref().expect("internal node on path");
                for j in 0..p {
                    raw[j] += n_node / n_side * v[j].abs();
                    norm[j] += v[j].abs();
                }
            }
        }
        let lfi = (0..p)
            .map(|j| if norm[j] > 0.0 { raw[j] / norm[j] } else { 0.0 })
            .collect();
        ImportanceVector {
            raw,
            normalizer: norm,
            lfi,
        }
    }

    /// Mean over trees of leaf depth plus `c(leaf population)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let total: f64 = self
            .trees
            .iter()
            .map(|t| {
                let leaf = *t.route(x).last().expect("non-empty path");
                t.depth[leaf] as f64 + oracle_harmonic_c(t.population(leaf).len())
            })
            .sum();
        total / self.trees.len() as f64
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        2f64.powf(-self.path_length(x) / oracle_harmonic_c(self.psi))
    }
}

pub fn oracle_importance(of: &OracleForest, x: &[f64]) -> ImportanceVector<f64> {
    of.importance(x)
}

/// Average precision by walking every distinct threshold: predict positive
/// when `score >= t`, and accumulate `(R_t - R_prev) * P_t`.
pub fn oracle_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if *l == 1 {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

/// `P(s+ > s-) + P(s+ = s-) / 2` over every positive/negative pair.
pub fn oracle_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Largest elementwise `|a - b| / max(|a|, |b|)`, with `0/0 = 0`.
pub fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Gaussian-ish dataset with a few shifted rows, reproducible from `seed`.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let shift = if i % 17 == 0 { 4.0 } else { 0.0 };
            (0..p)
                .map(|_| rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0) + shift)
                .collect()
        })
        .collect();
    Dataset::from_rows(&rows, None).expect("valid rows")
}

/// Strategy for a dataset with `n` in `n_range` rows and `p` in `p_range`
/// features, values from a bounded grid so ties occur.
pub fn arb_dataset(
    n_range: std::ops::RangeInclusive<usize>,
    p_range: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Dataset<f64>> {
    (n_range, p_range).prop_flat_map(|(n, p)| {
        prop::collection::vec(prop::collection::vec(-40i32..40, p), n).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| r.into_iter().map(|v| f64::from(v) / 8.0).collect())
                .collect();
            Dataset::from_rows(&rows, None).expect("valid rows")
        })
    })
}

/// Strategy for `(scores, labels)` of length in `n_range` with at least one
/// positive and one negative. Scores are drawn from `levels` distinct values,
/// so small `levels` produce heavy ties.
pub fn arb_labeled_scores(
    n_range: std::ops::RangeInclusive<usize>,
    levels: u32,
) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    n_range
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(0..levels, n),
                prop::collection::vec(0u8..=1, n),
            )
        })
        .prop_map(|(s, mut l)| {
            l[0] = 1;
            let last = l.len() - 1;
            l[last] = 0;
            (s.into_iter().map(|v| f64::from(v) / 7.0).collect(), l)
        })
}

/// Seeded `(scores, labels)` of length `n >= 2` with both classes present;
/// scores take `levels` distinct values.
pub fn random_labeled_scores(seed: u64, n: usize, levels: u32) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
    labels[0] = 1;
    labels[n - 1] = 0;
    (scores, labels)
}

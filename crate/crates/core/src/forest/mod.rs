//! Isolation-tree ensembles: fitting, scoring and thresholding.

mod io;
mod params;
mod tree;

pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use params::{Contamination, ForestParams, MaxDepth, Mode};
pub use tree::{Node, Split, Tree};

use rand::{seq::index, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Average path length of an unsuccessful search in a binary search tree
/// of `n` points, using the exact harmonic sum: `c(n) = 2 H(n-1) - 2 (n-1) / n`,
/// with `c(0) = c(1) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (n - 1) as f64 / n as f64
}

/// `c(0..=n)`, built incrementally from the same harmonic partial sums.
fn path_length_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut harmonic = 0.0;
    for k in 0..=n {
        if k <= 1 {
            table.push(0.0);
        } else {
            harmonic += 1.0 / (k - 1) as f64;
            table.push(2.0 * harmonic - 2.0 * (k - 1) as f64 / k as f64);
        }
    }
    table
}

/// Deterministic per-tree generator: one ChaCha stream per tree index under
/// the root seed, so trees can be grown in any order or thread.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Linear-interpolation empirical quantile, `q` in `[0, 1]`.
pub fn quantile<T: Scalar>(values: &[T], q: f64) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::from_f64_lossy(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest<T> {
    pub(crate) params: ForestParams,
    pub(crate) trees: Vec<Tree<T>>,
    pub(crate) n_features: usize,
    pub(crate) feature_names: Vec<String>,
    /// Subsample size actually used (`params.sample_size` clamped to `n`).
    pub(crate) sample_size: usize,
    pub(crate) max_depth: usize,
    pub(crate) threshold: Option<T>,
    pub(crate) c_psi: T,
    /// `c(k)` for every possible leaf size `k <= sample_size`.
    pub(crate) c_table: Vec<T>,
}

impl<T: Scalar> Forest<T> {
    /// Grows `params.n_trees` trees in parallel and, when the contamination
    /// can be resolved, calibrates the anomaly threshold on the training scores.
    pub fn fit(d: &Dataset<T>, params: &ForestParams) -> Result<Self> {
        let mut forest = Self::grow(d, params)?;
        let contamination = match params.contamination {
            Contamination::Fixed(c) => Some(c),
            Contamination::Auto => d.prevalence().filter(|&c| c > 0.0).map(|c| c.min(0.5)),
        };
        if let Some(c) = contamination {
            forest.calibrate(d, c)?;
        }
        Ok(forest)
    }

    /// Grows the trees without calibrating a threshold.
    pub fn grow(d: &Dataset<T>, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let n = d.n_samples();
        if n < 2 {
            return Err(Error::Domain(format!("fit needs at least 2 samples, got {n}")));
        }
        let sample_size = params.sample_size.min(n);
        let max_depth = params.max_depth.resolve(sample_size);
        let trees: Vec<Tree<T>> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(params.seed, t);
                let subsample = index::sample(&mut rng, n, sample_size).into_vec();
                Tree::grow(d, subsample, params.mode, max_depth, params.eta, &mut rng)
            })
            .collect();

        Ok(Forest::assemble(
            params.clone(),
            trees,
            d.n_features(),
            d.feature_names().to_vec(),
            sample_size,
            max_depth,
            None,
        ))
    }

    /// Builds a forest from already-grown trees (hand-made fixtures, model
    /// loading). Leaf sizes must not exceed `sample_size`.
    pub fn from_trees(
        params: ForestParams,
        trees: Vec<Tree<T>>,
        feature_names: Vec<String>,
        sample_size: usize,
        threshold: Option<T>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Domain("forest needs at least one tree".into()));
        }
        if feature_names.is_empty() {
            return Err(Error::Domain("forest needs at least one feature".into()));
        }
        if sample_size < 2 {
            return Err(Error::Domain("sample_size must be at least 2".into()));
        }
        let mut max_depth = 0;
        for tree in &trees {
            for node in tree.nodes() {
                if node.n_node() > sample_size {
                    return Err(Error::Corruption(format!(
                        "node holds {} rows, more than the subsample size {sample_size}",
                        node.n_node()
                    )));
                }
                if let Some(s) = node.split() {
                    if s.normal().len() != feature_names.len() {
                        return Err(Error::Shape {
                            expected: feature_names.len(),
                            got: s.normal().len(),
                        });
                    }
                }
                max_depth = max_depth.max(node.depth());
            }
        }
        let max_depth = params.max_depth.resolve(sample_size).max(max_depth);
        let p = feature_names.len();
        Ok(Forest::assemble(params, trees, p, feature_names, sample_size, max_depth, threshold))
    }

    pub(crate) fn assemble(
        params: ForestParams,
        trees: Vec<Tree<T>>,
        n_features: usize,
        feature_names: Vec<String>,
        sample_size: usize,
        max_depth: usize,
        threshold: Option<T>,
    ) -> Self {
        let c_table: Vec<T> = path_length_table(sample_size)
            .into_iter()
            .map(T::from_f64_lossy)
            .collect();
        Forest {
            params,
            trees,
            n_features,
            feature_names,
            sample_size,
            max_depth,
            threshold,
            c_psi: c_table[sample_size],
            c_table,
        }
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Average path normalizer `c(psi)`.
    pub fn c_psi(&self) -> T {
        self.c_psi
    }

    pub fn threshold(&self) -> Option<T> {
        self.threshold
    }

    /// Sets the threshold to the `1 - contamination` quantile of the scores
    /// of `train`.
    pub fn calibrate(&mut self, train: &Dataset<T>, contamination: f64) -> Result<()> {
        let scores = self.score_batch(train)?;
        self.calibrate_from_scores(&scores, contamination)
    }

    pub fn calibrate_from_scores(&mut self, train_scores: &[T], contamination: f64) -> Result<()> {
        if !(contamination > 0.0 && contamination <= 0.5) {
            return Err(Error::Domain(format!(
                "contamination {contamination} outside (0, 0.5]"
            )));
        }
        if train_scores.is_empty() {
            return Err(Error::Domain("no scores to calibrate on".into()));
        }
        self.threshold = Some(quantile(train_scores, 1.0 - contamination));
        Ok(())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn path_length_unchecked(&self, x: &[T]) -> T {
        let total = self.trees.iter().fold(T::zero(), |acc, tree| {
            let leaf = tree.leaf(x);
            acc + T::from_usize_lossy(leaf.depth) + self.c_table[leaf.n_node]
        });
        total / T::from_usize_lossy(self.trees.len())
    }

    /// Mean over trees of the leaf depth plus `c(leaf_size)`.
    pub fn path_length(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.path_length_unchecked(x))
    }

    /// `2^(-E[h(x)] / c(psi))`, in `(0, 1]`; larger is more anomalous.
    pub fn anomaly_score(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(score_from_path(self.path_length_unchecked(x), self.c_psi))
    }

    pub fn score_batch(&self, d: &Dataset<T>) -> Result<Vec<T>> {
        if d.n_features() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: d.n_features(),
            });
        }
        let rows: Vec<&[T]> = d.rows().collect();
        Ok(rows
            .par_iter()
            .map(|x| score_from_path(self.path_length_unchecked(x), self.c_psi))
            .collect())
    }

    /// Binary labels: 1 where the score is strictly above the calibrated threshold.
    pub fn predict(&self, d: &Dataset<T>) -> Result<Vec<u8>> {
        let threshold = self.threshold.ok_or_else(|| {
            Error::State("no anomaly threshold: contamination is auto and no labels were seen".into())
        })?;
        Ok(self
            .score_batch(d)?
            .into_iter()
            .map(|s| u8::from(s > threshold))
            .collect())
    }
}

pub fn score_from_path<T: Scalar>(path_length: T, c_psi: T) -> T {
    T::from_f64_lossy(2.0).powf(-path_length / c_psi)
}

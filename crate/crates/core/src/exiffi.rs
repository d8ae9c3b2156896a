//! ExIFFI explanations: per-node imbalance coefficients, local feature
//! importance (LFI) and global feature importance (GFI).
//!
//! For a sample `x` reaching an internal node with hyperplane normal `v`,
//! the node contributes `(|X| / |S|) * abs(v)` where `S` is the child on the
//! side `x` falls (`L` when `v·x > v·p`, `R` otherwise). Summing over every
//! node on the path of every tree gives the raw importance `I(x)`; summing
//! `abs(v)` over the same nodes gives the normalizer `V(x)`, and
//! `LFI(x) = I(x) / V(x)` elementwise. Components with `V = 0` (features never
//! used on the path) are set to 0.
//!
//! GFI is the elementwise ratio of the outlier-set importance to the
//! inlier-set importance, each computed as mean raw importance over mean
//! normalizer within the set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{quantile, Forest, ForestParams, Node};
use crate::scalar::Scalar;
use crate::seeds::derive_seed;

/// Number of top features emitted for score plots.
pub const DEFAULT_TOP_K: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceVector<T> {
    /// `I(x)`.
    pub raw: Vec<T>,
    /// `V(x)`.
    pub normalizer: Vec<T>,
    pub lfi: Vec<T>,
}

impl<T: Scalar> ImportanceVector<T> {
    fn zeros(p: usize) -> Self {
        ImportanceVector {
            raw: vec![T::zero(); p],
            normalizer: vec![T::zero(); p],
            lfi: vec![T::zero(); p],
        }
    }

    fn finish(mut self) -> Self {
        self.lfi = ratio(&self.raw, &self.normalizer);
        self
    }
}

/// Elementwise `a / b` with `x / 0 = 0`.
fn ratio<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter()
        .zip(b)
        .map(|(&n, &d)| if d > T::zero() { n / d } else { T::zero() })
        .collect()
}

/// Imbalance coefficient of one internal node for sample `x`.
pub fn node_lambda<T: Scalar>(node: &Node<T>, x: &[T]) -> Result<Vec<T>> {
    let split = node
        .split()
        .ok_or_else(|| Error::Degenerate("imbalance coefficient of a leaf node".into()))?;
    if x.len() != split.normal().len() {
        return Err(Error::Shape {
            expected: split.normal().len(),
            got: x.len(),
        });
    }
    let side = if split.goes_left(x) {
        split.n_left()
    } else {
        split.n_right()
    };
    if side == 0 {
        return Err(Error::Degenerate(
            "sample falls on a side with no training rows".into(),
        ));
    }
    let factor = T::from_usize_lossy(node.n_node()) / T::from_usize_lossy(side);
    Ok(split.normal().iter().map(|&v| factor * v.abs()).collect())
}

/// `I(x)`, `V(x)` and `LFI(x)` over every tree of the forest.
pub fn local_importance<T: Scalar>(f: &Forest<T>, x: &[T]) -> Result<ImportanceVector<T>> {
    if x.len() != f.n_features() {
        return Err(Error::Shape {
            expected: f.n_features(),
            got: x.len(),
        });
    }
    local_importance_unchecked(f, x)
}

fn local_importance_unchecked<T: Scalar>(f: &Forest<T>, x: &[T]) -> Result<ImportanceVector<T>> {
    let mut out = ImportanceVector::zeros(f.n_features());
    for tree in f.trees() {
        let nodes = tree.nodes();
        let mut node = &nodes[0];
        while let Some(split) = node.split() {
            let left = split.goes_left(x);
            let side = if left { split.n_left() } else { split.n_right() };
            if side == 0 {
                return Err(Error::Degenerate(
                    "sample falls on a side with no training rows".into(),
                ));
            }
            let factor = T::from_usize_lossy(node.n_node()) / T::from_usize_lossy(side);
            for ((raw, norm), &v) in out
                .raw
                .iter_mut()
                .zip(out.normalizer.iter_mut())
                .zip(split.normal())
            {
                let a = v.abs();
                *raw = *raw + factor * a;
                *norm = *norm + a;
            }
            node = &nodes[if left { split.left() } else { split.right() }];
        }
    }
    Ok(out.finish())
}

/// Local importance for every row, computed in parallel over rows.
pub fn local_importance_batch<T: Scalar>(
    f: &Forest<T>,
    d: &Dataset<T>,
) -> Result<Vec<ImportanceVector<T>>> {
    if d.n_features() != f.n_features() {
        return Err(Error::Shape {
            expected: f.n_features(),
            got: d.n_features(),
        });
    }
    let rows: Vec<&[T]> = d.rows().collect();
    rows.par_iter()
        .map(|x| local_importance_unchecked(f, x))
        .collect()
}

/// How the outlier set for GFI is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierSet {
    /// Ground-truth labels of the evaluation data.
    Labels,
    /// Top `c` fraction of the evaluation data by anomaly score, using the
    /// thresholding rule of [`Forest::predict`] calibrated on the training data.
    Contamination(f64),
    /// Explicit 0/1 mask over the evaluation rows.
    Mask(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GfiResult {
    pub feature_names: Vec<String>,
    /// Per-feature GFI; the mean of `runs` when there are several.
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
    /// One score vector per seed.
    pub runs: Vec<Vec<f64>>,
}

impl GfiResult {
    fn from_runs(feature_names: Vec<String>, runs: Vec<Vec<f64>>) -> Self {
        let p = feature_names.len();
        let mut scores = vec![0.0; p];
        for run in &runs {
            for (s, v) in scores.iter_mut().zip(run) {
                *s += v;
            }
        }
        let k = runs.len().max(1) as f64;
        scores.iter_mut().for_each(|s| *s /= k);
        let ranking = rank_descending(&scores);
        GfiResult {
            feature_names,
            scores,
            ranking,
            runs,
        }
    }

    /// `(feature index, name, score)` for the `k` highest-ranked features.
    pub fn top_k(&self, k: usize) -> Vec<(usize, &str, f64)> {
        self.ranking
            .iter()
            .take(k)
            .map(|&j| (j, self.feature_names[j].as_str(), self.scores[j]))
            .collect()
    }
}

/// Indices sorted by descending value; equal values keep ascending index order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// GFI of one fitted forest on `d`, with `outlier_mask[i] == 1` marking outliers.
pub fn global_importance<T: Scalar>(
    f: &Forest<T>,
    d: &Dataset<T>,
    outlier_mask: &[u8],
) -> Result<GfiResult> {
    let scores = gfi_scores(f, d, outlier_mask)?;
    Ok(GfiResult::from_runs(f.feature_names().to_vec(), vec![scores]))
}

fn gfi_scores<T: Scalar>(f: &Forest<T>, d: &Dataset<T>, mask: &[u8]) -> Result<Vec<f64>> {
    if mask.len() != d.n_samples() {
        return Err(Error::Partition(format!(
            "mask has {} entries for {} samples",
            mask.len(),
            d.n_samples()
        )));
    }
    let n_out = mask.iter().filter(|&&m| m == 1).count();
    if n_out == 0 || n_out == mask.len() {
        return Err(Error::Partition(
            "outlier mask must contain both outliers and inliers".into(),
        ));
    }
    let importances = local_importance_batch(f, d)?;
    let p = f.n_features();
    let mut sums = [vec![T::zero(); p], vec![T::zero(); p], vec![T::zero(); p], vec![T::zero(); p]];
    for (imp, &m) in importances.iter().zip(mask) {
        let base = if m == 1 { 0 } else { 2 };
        for j in 0..p {
            sums[base][j] = sums[base][j] + imp.raw[j];
            sums[base + 1][j] = sums[base + 1][j] + imp.normalizer[j];
        }
    }
    // equal set sizes cancel, so sum ratios equal mean ratios
    let outliers = ratio(&sums[0], &sums[1]);
    let inliers = ratio(&sums[2], &sums[3]);
    Ok(ratio(&outliers, &inliers).into_iter().map(Scalar::as_f64).collect())
}

/// Resolves an [`OutlierSet`] into a mask over `eval` for a fitted forest.
pub fn outlier_mask<T: Scalar>(
    f: &Forest<T>,
    train: &Dataset<T>,
    eval: &Dataset<T>,
    outliers: &OutlierSet,
) -> Result<Vec<u8>> {
    match outliers {
        OutlierSet::Labels => eval
            .labels()
            .map(<[u8]>::to_vec)
            .ok_or_else(|| Error::Label("GFI from labels needs a labelled dataset".into())),
        OutlierSet::Mask(m) => Ok(m.clone()),
        OutlierSet::Contamination(c) => {
            let mut calibrated = f.clone();
            calibrated.calibrate(train, *c)?;
            calibrated.predict(eval)
        }
    }
}

/// GFI repeated over `n_seeds` refits of `params` on `train`, each evaluated
/// on `eval`. Run `k` uses seed `derive_seed(params.seed, k)`.
pub fn global_importance_runs<T: Scalar>(
    train: &Dataset<T>,
    eval: &Dataset<T>,
    params: &ForestParams,
    outliers: &OutlierSet,
    n_seeds: usize,
) -> Result<GfiResult> {
    if n_seeds == 0 {
        return Err(Error::Domain("n_seeds must be positive".into()));
    }
    let runs = (0..n_seeds)
        .map(|k| {
            let run_params = params.clone().with_seed(derive_seed(params.seed, k as u64));
            let f = Forest::fit(train, &run_params)?;
            let mask = outlier_mask(&f, train, eval, outliers)?;
            gfi_scores(&f, eval, &mask)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GfiResult::from_runs(train.feature_names().to_vec(), runs))
}

/// LFI of a `grid x grid` lattice over two features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scoremap {
    pub feat_i: usize,
    pub feat_j: usize,
    /// Grid coordinates along `feat_i` (rows of the map).
    pub xs: Vec<f64>,
    /// Grid coordinates along `feat_j` (columns of the map).
    pub ys: Vec<f64>,
    /// `lfi_i[a][b]`: LFI of `feat_i` at `(xs[a], ys[b])`.
    pub lfi_i: Vec<Vec<f64>>,
    pub lfi_j: Vec<Vec<f64>>,
}

/// Evaluates LFI on a lattice spanning the bounding box of `d` in
/// `(feat_i, feat_j)`, all other coordinates fixed at their median.
pub fn local_scoremap<T: Scalar>(
    f: &Forest<T>,
    d: &Dataset<T>,
    feat_i: usize,
    feat_j: usize,
    grid: usize,
) -> Result<Scoremap> {
    let p = d.n_features();
    if p != f.n_features() {
        return Err(Error::Shape {
            expected: f.n_features(),
            got: p,
        });
    }
    if feat_i >= p || feat_j >= p {
        return Err(Error::Index(format!(
            "features ({feat_i}, {feat_j}) out of range for {p} features"
        )));
    }
    if feat_i == feat_j {
        return Err(Error::Index("scoremap needs two distinct features".into()));
    }
    if grid < 2 {
        return Err(Error::Domain(format!("grid must be at least 2, got {grid}")));
    }
    if d.n_samples() == 0 {
        return Err(Error::Domain("scoremap needs data".into()));
    }

    let base: Vec<T> = (0..p).map(|j| quantile(&d.column(j), 0.5)).collect();
    let axis = |j: usize| -> Vec<T> {
        let col = d.column(j);
        let lo = col.iter().copied().fold(T::infinity(), T::min);
        let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
        let step = (hi - lo) / T::from_usize_lossy(grid - 1);
        (0..grid)
            .map(|k| if k == grid - 1 { hi } else { lo + step * T::from_usize_lossy(k) })
            .collect()
    };
    let xs = axis(feat_i);
    let ys = axis(feat_j);

    let cells: Vec<(usize, usize)> = (0..grid).flat_map(|a| (0..grid).map(move |b| (a, b))).collect();
    let values = cells
        .par_iter()
        .map(|&(a, b)| {
            let mut x = base.clone();
            x[feat_i] = xs[a];
            x[feat_j] = ys[b];
            let imp = local_importance_unchecked(f, &x)?;
            Ok((imp.lfi[feat_i].as_f64(), imp.lfi[feat_j].as_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lfi_i = vec![vec![0.0; grid]; grid];
    let mut lfi_j = vec![vec![0.0; grid]; grid];
    for (&(a, b), &(vi, vj)) in cells.iter().zip(&values) {
        lfi_i[a][b] = vi;
        lfi_j[a][b] = vj;
    }
    Ok(Scoremap {
        feat_i,
        feat_j,
        xs: xs.into_iter().map(Scalar::as_f64).collect(),
        ys: ys.into_iter().map(Scalar::as_f64).collect(),
        lfi_i,
        lfi_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Split, Tree};

    fn one_node_forest() -> Forest<f64> {
        // normal (0.6, -0.8) through the origin; 2 rows on the left, 8 on the right
        let split = Split::new(vec![0.6, -0.8], vec![0.0, 0.0], 1, 2, 2, 8);
        let nodes = vec![Node::internal(0, 10, split), Node::leaf(1, 2), Node::leaf(1, 8)];
        let tree = Tree::from_nodes(nodes, (0..10).collect(), 2).unwrap();
        Forest::from_trees(
            ForestParams::default().with_sample_size(10),
            vec![tree],
            vec!["a".into(), "b".into()],
            10,
            None,
        )
        .unwrap()
    }

    #[test]
    fn lambda_on_left_side() {
        let f = one_node_forest();
        let x = [1.0, 0.0]; // 0.6 > 0
        let lambda = node_lambda(f.trees()[0].root(), &x).unwrap();
        assert!((lambda[0] - 3.0).abs() < 1e-12);
        assert!((lambda[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_balanced_is_doubled() {
        let split = Split::new(vec![0.0, 1.0, 0.0], vec![0.0; 3], 1, 2, 5, 5);
        let node = Node::internal(0, 10, split);
        for x in [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]] {
            assert_eq!(node_lambda(&node, &x).unwrap(), vec![0.0, 2.0, 0.0]);
        }
    }

    #[test]
    fn lambda_of_leaf_is_degenerate() {
        let leaf = Node::<f64>::leaf(0, 3);
        assert!(matches!(node_lambda(&leaf, &[0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn lfi_of_single_node() {
        let f = one_node_forest();
        let imp = local_importance(&f, &[1.0, 0.0]).unwrap();
        assert!((imp.lfi[0] - 5.0).abs() < 1e-12);
        assert!((imp.lfi[1] - 5.0).abs() < 1e-12);
        // right side: 10/8
        let imp = local_importance(&f, &[-1.0, 0.0]).unwrap();
        assert!((imp.lfi[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn single_leaf_forest_has_zero_importance() {
        let tree = Tree::from_nodes(vec![Node::leaf(0, 2)], vec![0, 1], 2).unwrap();
        let f = Forest::from_trees(
            ForestParams::default(),
            vec![tree],
            vec!["a".into(), "b".into()],
            2,
            None,
        )
        .unwrap();
        let imp = local_importance(&f, &[3.0, 4.0]).unwrap();
        assert_eq!(imp, ImportanceVector::zeros(2));
    }

    #[test]
    fn ranking_ties_by_index() {
        assert_eq!(rank_descending(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn gfi_elementwise_ratio() {
        // two rows on opposite sides: outlier left (10/2), inlier right (10/8)
        let f = one_node_forest();
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], None).unwrap();
        let g = global_importance(&f, &d, &[1, 0]).unwrap();
        assert!((g.scores[0] - 4.0).abs() < 1e-12);
        assert!((g.scores[1] - 4.0).abs() < 1e-12);
        assert_eq!(g.runs.len(), 1);
    }

    #[test]
    fn gfi_needs_both_classes() {
        let f = one_node_forest();
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], None).unwrap();
        assert!(matches!(global_importance(&f, &d, &[1, 1]), Err(Error::Partition(_))));
        assert!(matches!(global_importance(&f, &d, &[0, 0]), Err(Error::Partition(_))));
    }

    #[test]
    fn scoremap_errors_and_corners() {
        let f = one_node_forest();
        let d = Dataset::from_rows(&[vec![0.0, 0.0], vec![2.0, 4.0], vec![1.0, 1.0]], None).unwrap();
        assert!(matches!(local_scoremap(&f, &d, 0, 0, 4), Err(Error::Index(_))));
        assert!(matches!(local_scoremap(&f, &d, 0, 5, 4), Err(Error::Index(_))));
        let m = local_scoremap(&f, &d, 0, 1, 2).unwrap();
        assert_eq!(m.xs, vec![0.0, 2.0]);
        assert_eq!(m.ys, vec![0.0, 4.0]);
        // corner (2, 0) lies left of the plane: LFI = 5
        assert!((m.lfi_i[1][0] - 5.0).abs() < 1e-12);
        // corner (0, 0) is on the plane, which counts as right: 10/8
        assert!((m.lfi_i[0][0] - 1.25).abs() < 1e-12);
    }
}

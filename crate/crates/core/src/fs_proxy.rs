//! Feature-selection proxy task.
//!
//! Given a feature ranking (most important first), features are dropped one
//! at a time, the forest is refit on the retained columns and test average
//! precision is recorded:
//!
//! * `direct` drops the most important feature first,
//! * `inverse` drops the least important feature first,
//! * `random` drops features in a seeded random order, redrawn per seed.
//!
//! `AUC_FS` is the trapezoidal area of `AP_inverse(k) - AP_direct(k)` over
//! the retained-feature count `k`, divided by the width of the `k` range. It
//! lies in `[-1, 1]` and is positive when the ranking puts informative
//! features first.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::metrics::average_precision;
use crate::scalar::Scalar;
use crate::seeds::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Direct,
    Inverse,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Direct => "direct",
            Strategy::Inverse => "inverse",
            Strategy::Random => "random",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsPoint {
    pub n_features: usize,
    pub mean_ap: f64,
    pub std_ap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsCurve {
    pub strategy: Strategy,
    /// Ordered from `p` retained features down to 1.
    pub points: Vec<FsPoint>,
    /// Per-point AP of every seed, same order as `points`.
    pub runs: Vec<Vec<f64>>,
}

impl FsCurve {
    pub fn at(&self, n_features: usize) -> Option<&FsPoint> {
        self.points.iter().find(|pt| pt.n_features == n_features)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsResult {
    pub ranking: Vec<usize>,
    pub direct: FsCurve,
    pub inverse: FsCurve,
    pub random: FsCurve,
    /// `auc_fs(direct, inverse)`.
    pub auc_fs: f64,
    /// `auc_fs(direct, random)`: how far a random order sits above the direct curve.
    pub auc_fs_random: f64,
}

/// Uniformly random permutation of `0..p`, a baseline ranking.
pub fn random_ranking(p: usize, seed: u64) -> Vec<usize> {
    let mut r: Vec<usize> = (0..p).collect();
    r.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    r
}

fn check_ranking(ranking: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if ranking.len() != p {
        return Err(Error::Rank(format!(
            "ranking has {} entries for {p} features",
            ranking.len()
        )));
    }
    for &j in ranking {
        if j >= p || seen[j] {
            return Err(Error::Rank(format!("ranking is not a permutation of 0..{p}")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Columns kept when `k` features remain under a removal order that drops
/// `removal[0]` first. Returned sorted so equal sets give equal matrices.
fn retained(removal: &[usize], k: usize) -> Vec<usize> {
    let mut keep = removal[removal.len() - k..].to_vec();
    keep.sort_unstable();
    keep
}

/// Runs the direct, inverse and random curves for `ranking` (most important
/// first). Seed `s` of every point refits with `derive_seed(params.seed, s)`,
/// so the three strategies and every `k` share the same forest seeds.
pub fn run_feature_selection<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    params: &ForestParams,
    ranking: &[usize],
    n_seeds: usize,
) -> Result<FsResult> {
    let p = train.n_features();
    if test.n_features() != p {
        return Err(Error::Shape {
            expected: p,
            got: test.n_features(),
        });
    }
    let labels = test
        .labels()
        .ok_or_else(|| Error::Label("feature selection needs a labelled test set".into()))?;
    if !labels.contains(&1) {
        return Err(Error::Label("test set has no anomalies".into()));
    }
    check_ranking(ranking, p)?;
    if n_seeds == 0 {
        return Err(Error::Domain("n_seeds must be positive".into()));
    }

    let seeds: Vec<u64> = (0..n_seeds as u64).map(|s| derive_seed(params.seed, s)).collect();
    let direct_order = ranking.to_vec();
    let inverse_order: Vec<usize> = ranking.iter().rev().copied().collect();
    let random_orders: Vec<Vec<usize>> = seeds
        .iter()
        .map(|&s| random_ranking(p, derive_seed(s, u64::MAX)))
        .collect();

    let strategies = [Strategy::Direct, Strategy::Inverse, Strategy::Random];
    let mut tasks = Vec::new();
    for strategy in strategies {
        for k in (1..=p).rev() {
            for s in 0..n_seeds {
                let order = match strategy {
                    Strategy::Direct => &direct_order,
                    Strategy::Inverse => &inverse_order,
                    Strategy::Random => &random_orders[s],
                };
                tasks.push(retained(order, k));
            }
        }
    }
    let aps: Vec<f64> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, keep)| {
            let seed = seeds[t % n_seeds];
            let tr = train.select_features(keep)?;
            let te = test.select_features(keep)?;
            let forest = Forest::grow(&tr, &params.clone().with_seed(seed))?;
            average_precision(&forest.score_batch(&te)?, labels)
        })
        .collect::<Result<_>>()?;

    let mut curves = strategies.iter().enumerate().map(|(si, &strategy)| {
        let mut points = Vec::with_capacity(p);
        let mut runs = Vec::with_capacity(p);
        for (ki, k) in (1..=p).rev().enumerate() {
            let start = (si * p + ki) * n_seeds;
            let vals = aps[start..start + n_seeds].to_vec();
            let (mean_ap, std_ap) = mean_std(&vals);
            points.push(FsPoint {
                n_features: k,
                mean_ap,
                std_ap,
            });
            runs.push(vals);
        }
        FsCurve {
            strategy,
            points,
            runs,
        }
    });
    let direct = curves.next().expect("three curves");
    let inverse = curves.next().expect("three curves");
    let random = curves.next().expect("three curves");
    let auc = auc_fs(&direct, &inverse)?;
    let auc_random = auc_fs(&direct, &random)?;
    Ok(FsResult {
        ranking: ranking.to_vec(),
        direct,
        inverse,
        random,
        auc_fs: auc,
        auc_fs_random: auc_random,
    })
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalized signed area between `upper` and `lower` curves:
/// `trapz(AP_upper - AP_lower) / (k_max - k_min)`; 0 for a single-point grid.
pub fn auc_fs(lower: &FsCurve, upper: &FsCurve) -> Result<f64> {
    if lower.points.is_empty() || lower.points.len() != upper.points.len() {
        return Err(Error::Grid("curves have different lengths".into()));
    }
    if lower
        .points
        .iter()
        .zip(&upper.points)
        .any(|(a, b)| a.n_features != b.n_features)
    {
        return Err(Error::Grid("curves use different feature counts".into()));
    }
    let ks: Vec<f64> = lower.points.iter().map(|pt| pt.n_features as f64).collect();
    let gap: Vec<f64> = lower
        .points
        .iter()
        .zip(&upper.points)
        .map(|(a, b)| b.mean_ap - a.mean_ap)
        .collect();
    let span = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ks.iter().copied().fold(f64::INFINITY, f64::min);
    if span == 0.0 {
        return Ok(0.0);
    }
    let area: f64 = ks
        .windows(2)
        .zip(gap.windows(2))
        .map(|(k, g)| (k[0] - k[1]).abs() * (g[0] + g[1]) / 2.0)
        .sum();
    Ok(area / span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(strategy: Strategy, aps: &[f64]) -> FsCurve {
        let p = aps.len();
        FsCurve {
            strategy,
            points: aps
                .iter()
                .enumerate()
                .map(|(i, &a)| FsPoint {
                    n_features: p - i,
                    mean_ap: a,
                    std_ap: 0.0,
                })
                .collect(),
            runs: aps.iter().map(|&a| vec![a]).collect(),
        }
    }

    #[test]
    fn auc_examples() {
        let a = curve(Strategy::Direct, &[0.9, 0.5, 0.2, 0.1]);
        assert_eq!(auc_fs(&a, &a.clone()).unwrap(), 0.0);
        let zero = curve(Strategy::Direct, &[0.0; 5]);
        let one = curve(Strategy::Inverse, &[1.0; 5]);
        assert_eq!(auc_fs(&zero, &one).unwrap(), 1.0);
        assert_eq!(auc_fs(&one, &zero).unwrap(), -1.0);
    }

    #[test]
    fn auc_hand_value() {
        // gaps 0, 0.5, 1 over k = 3, 2, 1: area 0.25 + 0.75 = 1.0, span 2
        let d = curve(Strategy::Direct, &[1.0, 0.5, 0.0]);
        let i = curve(Strategy::Inverse, &[1.0, 1.0, 1.0]);
        assert!((auc_fs(&d, &i).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_grid_mismatch() {
        let a = curve(Strategy::Direct, &[0.9, 0.5]);
        let b = curve(Strategy::Inverse, &[0.9, 0.5, 0.1]);
        assert!(matches!(auc_fs(&a, &b), Err(Error::Grid(_))));
    }

    #[test]
    fn ranking_validation() {
        assert!(check_ranking(&[2, 0, 1], 3).is_ok());
        assert!(matches!(check_ranking(&[0, 0, 1], 3), Err(Error::Rank(_))));
        assert!(matches!(check_ranking(&[0, 1], 3), Err(Error::Rank(_))));
        assert!(matches!(check_ranking(&[0, 1, 3], 3), Err(Error::Rank(_))));
    }

    #[test]
    fn retained_sets() {
        assert_eq!(retained(&[3, 1, 0, 2], 4), vec![0, 1, 2, 3]);
        assert_eq!(retained(&[3, 1, 0, 2], 2), vec![0, 2]);
        assert_eq!(retained(&[3, 1, 0, 2], 1), vec![2]);
    }
}

//! Pairwise dependency profiling: Pearson correlation and histogram mutual
//! information.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_CORR_THRESHOLD: f64 = 0.05;
pub const DEFAULT_MI_BINS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyProfile {
    pub feature_names: Vec<String>,
    /// Row-major `p x p` Pearson matrix; rows/columns of constant features are 0.
    pub pearson: Vec<Vec<f64>>,
    /// Row-major `p x p` mutual information in nats; the diagonal holds the
    /// plug-in entropy of each binned column.
    pub mutual_info: Vec<Vec<f64>>,
    /// Indices of constant columns (excluded from the fractions).
    pub constant_features: Vec<usize>,
    pub corr_threshold: f64,
    pub mi_bins: usize,
    /// Fraction of non-constant pairs with `|rho| < corr_threshold`.
    pub frac_low_corr: f64,
    /// Fraction of non-constant pairs with `|rho| < corr_threshold` and MI > 0.
    ///
    /// The plug-in estimator is biased upward, so on finite samples almost
    /// every low-correlation pair has strictly positive MI.
    pub frac_nonlinear: f64,
}

/// Profiles every feature pair. Pairs are processed in parallel and written
/// back by pair index, so the result does not depend on scheduling.
pub fn profile_dependencies<T: Scalar>(
    d: &Dataset<T>,
    corr_threshold: f64,
    mi_bins: usize,
) -> Result<DependencyProfile> {
    let n = d.n_samples();
    let p = d.n_features();
    if n < 3 {
        return Err(Error::Domain(format!("profiling needs at least 3 samples, got {n}")));
    }
    if mi_bins < 2 {
        return Err(Error::Domain(format!("mi_bins must be >= 2, got {mi_bins}")));
    }

    let columns: Vec<Vec<f64>> = (0..p)
        .map(|j| d.column(j).into_iter().map(Scalar::as_f64).collect())
        .collect();
    let constant: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|&v| v == c[0]))
        .collect();
    let binned: Vec<Vec<usize>> = columns.iter().map(|c| bin_equal_width(c, mi_bins)).collect();

    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let cells: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let rho = if constant[i] || constant[j] {
                0.0
            } else if i == j {
                1.0
            } else {
                pearson(&columns[i], &columns[j])
            };
            (rho, mutual_information(&binned[i], &binned[j], mi_bins))
        })
        .collect();

    let mut pearson_m = vec![vec![0.0; p]; p];
    let mut mi_m = vec![vec![0.0; p]; p];
    for (&(i, j), &(rho, mi)) in pairs.iter().zip(&cells) {
        pearson_m[i][j] = rho;
        pearson_m[j][i] = rho;
        mi_m[i][j] = mi;
        mi_m[j][i] = mi;
    }

    let mut total = 0usize;
    let mut low = 0usize;
    let mut nonlinear = 0usize;
    for i in 0..p {
        for j in i + 1..p {
            if constant[i] || constant[j] {
                continue;
            }
            total += 1;
            if pearson_m[i][j].abs() < corr_threshold {
                low += 1;
                if mi_m[i][j] > 0.0 {
                    nonlinear += 1;
                }
            }
        }
    }
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };

    Ok(DependencyProfile {
        feature_names: d.feature_names().to_vec(),
        pearson: pearson_m,
        mutual_info: mi_m,
        constant_features: (0..p).filter(|&j| constant[j]).collect(),
        corr_threshold,
        mi_bins,
        frac_low_corr: frac(low),
        frac_nonlinear: frac(nonlinear),
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Equal-width bin index per value over the column's `[min, max]`.
pub(crate) fn bin_equal_width(col: &[f64], bins: usize) -> Vec<usize> {
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    col.iter()
        .map(|&v| {
            if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Plug-in mutual information (nats) of two binned columns.
pub(crate) fn mutual_information(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (pij * n * n / (pa[i] as f64 * pb[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cols(x: &[f64], y: &[f64]) -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = x.iter().zip(y).map(|(&a, &b)| vec![a, b]).collect();
        Dataset::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn identical_columns() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let prof = profile_dependencies(&two_cols(&x, &x), 0.05, 16).unwrap();
        assert!((prof.pearson[0][1] - 1.0).abs() < 1e-12);
        assert!(prof.mutual_info[0][1] > 0.0);
        assert!((prof.mutual_info[0][1] - prof.mutual_info[0][0]).abs() < 1e-12);
        assert_eq!(prof.frac_low_corr, 0.0);
    }

    #[test]
    fn independent_noise_has_low_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let prof = profile_dependencies(&two_cols(&x, &y), 0.05, 16).unwrap();
        assert!(prof.pearson[0][1].abs() < 0.05);
        assert_eq!(prof.frac_low_corr, 1.0);
    }

    #[test]
    fn square_on_symmetric_grid_is_nonlinear() {
        let x: Vec<f64> = (-50..=50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let prof = profile_dependencies(&two_cols(&x, &y), 0.05, 16).unwrap();
        assert!(prof.pearson[0][1].abs() < 1e-12);
        assert!(prof.mutual_info[0][1] > 0.5);
        assert_eq!(prof.frac_nonlinear, 1.0);
    }

    #[test]
    fn constant_column_is_flagged() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![2.0; 20];
        let prof = profile_dependencies(&two_cols(&x, &y), 0.05, 8).unwrap();
        assert_eq!(prof.constant_features, vec![1]);
        assert_eq!(prof.pearson[0][1], 0.0);
        assert_eq!(prof.pearson[1][1], 0.0);
        assert_eq!(prof.pearson[0][0], 1.0);
        assert_eq!(prof.frac_low_corr, 0.0);
    }

    #[test]
    fn preconditions() {
        let d = two_cols(&[1.0, 2.0], &[3.0, 4.0]);
        assert!(profile_dependencies(&d, 0.05, 16).is_err());
        let d = two_cols(&[1.0, 2.0, 3.0], &[3.0, 4.0, 1.0]);
        assert!(profile_dependencies(&d, 0.05, 1).is_err());
    }
}

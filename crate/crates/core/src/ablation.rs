//! Hyperparameter sweeps over a fixed train/test split.
//!
//! Every setting reuses the same split and the same per-seed forest seeds
//! (`derive_seed(params.seed, s)`), so differences between settings come
//! from the parameter alone.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exiffi::global_importance;
use crate::forest::{quantile, Forest, ForestParams, MaxDepth};
use crate::fs_proxy::{mean_std, run_feature_selection};
use crate::metrics::{average_precision, roc_auc};
use crate::scalar::Scalar;
use crate::seeds::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `runs[i][s]`: metric of seed `s` at `values[i]`.
    pub runs: Vec<Vec<f64>>,
}

impl SweepResult {
    fn from_runs(parameter: &str, metric: &str, values: Vec<f64>, runs: Vec<Vec<f64>>) -> Self {
        let (mean, std) = runs.iter().map(|r| mean_std(r)).unzip();
        SweepResult {
            parameter: parameter.into(),
            metric: metric.into(),
            values,
            mean,
            std,
            runs,
        }
    }

    /// Index of the setting with the largest mean (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.mean.iter().enumerate() {
            if m > self.mean[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestParameter {
    Trees,
    MaxDepth,
    SampleSize,
}

impl ForestParameter {
    pub fn name(self) -> &'static str {
        match self {
            ForestParameter::Trees => "n_trees",
            ForestParameter::MaxDepth => "max_depth",
            ForestParameter::SampleSize => "sample_size",
        }
    }

    fn apply(self, params: &ForestParams, value: usize) -> ForestParams {
        let mut p = params.clone();
        match self {
            ForestParameter::Trees => p.n_trees = value,
            ForestParameter::MaxDepth => p.max_depth = MaxDepth::Fixed(value),
            ForestParameter::SampleSize => p.sample_size = value,
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationMetric {
    RocAuc,
    AucFs,
}

fn test_labels<T: Scalar>(test: &Dataset<T>) -> Result<&[u8]> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::Label("sweeps need a labelled test set".into()))?;
    if !labels.contains(&1) || !labels.contains(&0) {
        return Err(Error::Label("test set needs both anomalies and inliers".into()));
    }
    Ok(labels)
}

/// `points` log-spaced values from `center / factor` to `center * factor`.
pub fn log_grid(center: f64, factor: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![center];
    }
    (0..points)
        .map(|i| {
            let e = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            center * factor.powf(e)
        })
        .collect()
}

/// Test AP for each value of an integer forest hyperparameter.
pub fn sweep_forest_parameter<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    params: &ForestParams,
    parameter: ForestParameter,
    values: &[usize],
    n_seeds: usize,
) -> Result<SweepResult> {
    let labels = test_labels(test)?;
    if values.is_empty() || n_seeds == 0 {
        return Err(Error::Domain("sweep needs values and seeds".into()));
    }
    let runs = values
        .iter()
        .map(|&v| {
            (0..n_seeds as u64)
                .map(|s| {
                    let p = parameter.apply(params, v).with_seed(derive_seed(params.seed, s));
                    let f = Forest::grow(train, &p)?;
                    average_precision(&f.score_batch(test)?, labels)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::from_runs(
        parameter.name(),
        "average_precision",
        values.iter().map(|&v| v as f64).collect(),
        runs,
    ))
}

/// Test AP per ensemble size; `tree_counts` must be ascending.
pub fn sweep_trees<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    params: &ForestParams,
    tree_counts: &[usize],
    n_seeds: usize,
) -> Result<SweepResult> {
    if tree_counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("tree counts must be sorted ascending".into()));
    }
    sweep_forest_parameter(train, test, params, ForestParameter::Trees, tree_counts, n_seeds)
}

/// Sweeps the assumed contamination.
///
/// For each seed one forest is grown on `train`; each contamination `c` then
/// sets the threshold at the `1 - c` quantile of the training scores.
///
/// * `RocAuc`: ROC AUC of the binary test predictions at that threshold.
/// * `AucFs`: the training rows above the threshold form the outlier set of
///   a GFI; the resulting ranking runs the feature-selection task (with
///   `fs_seeds` refits per point) and its `AUC_FS` is recorded.
pub fn sweep_contamination<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    params: &ForestParams,
    contaminations: &[f64],
    n_seeds: usize,
    metric: ContaminationMetric,
    fs_seeds: usize,
) -> Result<SweepResult> {
    let labels = test_labels(test)?;
    if contaminations.is_empty() || n_seeds == 0 {
        return Err(Error::Domain("sweep needs values and seeds".into()));
    }
    if let Some(c) = contaminations.iter().find(|&&c| !(c > 0.0 && c <= 0.5)) {
        return Err(Error::Domain(format!("contamination {c} outside (0, 0.5]")));
    }

    let mut runs = vec![Vec::with_capacity(n_seeds); contaminations.len()];
    for s in 0..n_seeds as u64 {
        let seeded = params.clone().with_seed(derive_seed(params.seed, s));
        let forest = Forest::grow(train, &seeded)?;
        let train_scores = forest.score_batch(train)?;
        let test_scores = match metric {
            ContaminationMetric::RocAuc => forest.score_batch(test)?,
            ContaminationMetric::AucFs => Vec::new(),
        };
        for (i, &c) in contaminations.iter().enumerate() {
            let threshold = quantile(&train_scores, 1.0 - c);
            let value = match metric {
                ContaminationMetric::RocAuc => {
                    let predicted: Vec<f64> = test_scores
                        .iter()
                        .map(|&v| if v > threshold { 1.0 } else { 0.0 })
                        .collect();
                    roc_auc(&predicted, labels)?
                }
                ContaminationMetric::AucFs => {
                    let mask: Vec<u8> = train_scores.iter().map(|&v| u8::from(v > threshold)).collect();
                    let gfi = global_importance(&forest, train, &mask)?;
                    run_feature_selection(train, test, &seeded, &gfi.ranking, fs_seeds)?.auc_fs
                }
            };
            runs[i].push(value);
        }
    }
    let name = match metric {
        ContaminationMetric::RocAuc => "roc_auc",
        ContaminationMetric::AucFs => "auc_fs",
    };
    Ok(SweepResult::from_runs("contamination", name, contaminations.to_vec(), runs))
}

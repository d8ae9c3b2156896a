//! Detection metrics: average precision, ROC AUC, precision at a
//! contamination threshold, and the per-model report.
//!
//! Ties are explicit: AP treats a run of equal scores as one step of the
//! precision/recall walk, and ROC AUC gives half credit to tied pairs. Both
//! are therefore invariant under strictly increasing score transforms.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::quantile;
use crate::scalar::Scalar;

fn check_inputs<T>(scores: &[T], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Indices ordered by descending score.
fn descending<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    idx
}

/// `sum_k (R_k - R_{k-1}) * P_k` over the descending ranking, one step per
/// group of tied scores.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check_inputs(scores, labels)?;
    if pos == 0 {
        return Err(Error::Partition("average precision needs a positive label".into()));
    }
    let order = descending(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(labels[order[i]] == 1);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Mann-Whitney form `P(s+ > s-) + P(s+ = s-) / 2`, via mid-ranks.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Partition("ROC AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        let group_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid * group_pos as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtContamination {
    pub precision: f64,
    /// Set when no score exceeded the threshold; `precision` is then 0.
    pub no_positive_predictions: bool,
}

/// Precision of the predictions `score > quantile(scores, 1 - contamination)`.
pub fn precision_at_contamination<T: Scalar>(
    scores: &[T],
    labels: &[u8],
    contamination: f64,
) -> Result<PrecisionAtContamination> {
    check_inputs(scores, labels)?;
    if !(contamination > 0.0 && contamination <= 0.5) {
        return Err(Error::Domain(format!(
            "contamination {contamination} outside (0, 0.5]"
        )));
    }
    if scores.is_empty() {
        return Err(Error::Domain("no scores".into()));
    }
    let threshold = quantile(scores, 1.0 - contamination);
    let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s > threshold)).collect();
    Ok(precision_of_predictions(&predictions, labels))
}

pub fn precision_of_predictions(predictions: &[u8], labels: &[u8]) -> PrecisionAtContamination {
    let predicted = predictions.iter().filter(|&&p| p == 1).count();
    if predicted == 0 {
        return PrecisionAtContamination {
            precision: 0.0,
            no_positive_predictions: true,
        };
    }
    let tp = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| p == 1 && l == 1)
        .count();
    PrecisionAtContamination {
        precision: tp as f64 / predicted as f64,
        no_positive_predictions: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub average_precision: f64,
    pub precision: f64,
    pub roc_auc: f64,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
}

/// Runs `f` and returns its value with the elapsed monotonic time.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Aligned text table with one row per model.
pub fn format_table(rows: &[(String, MetricReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>17}  {:>9}  {:>7}  {:>12}  {:>16}",
        "Model", "Average Precision", "Precision", "ROC AUC", "Fit Time (s)", "Predict Time (s)"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>17.2}  {:>9.2}  {:>7.2}  {:>12}  {:>16}",
            name,
            r.average_precision,
            r.precision,
            r.roc_auc,
            round_sig(r.fit_time_s, 3),
            round_sig(r.predict_time_s, 3)
        );
    }
    out
}

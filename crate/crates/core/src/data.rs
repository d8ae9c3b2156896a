//! Tabular datasets: validation, CSV ingestion, splitting.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major numeric matrix with feature names and optional binary labels
/// (`1` = anomaly).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    name: String,
    values: Vec<T>,
    n_samples: usize,
    n_features: usize,
    feature_names: Vec<String>,
    labels: Option<Vec<u8>>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from a row-major buffer, enforcing every invariant:
    /// finite values, unique non-empty names, `{0,1}` labels of matching length.
    pub fn new(
        name: impl Into<String>,
        values: Vec<T>,
        n_features: usize,
        feature_names: Vec<String>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Domain("dataset needs at least one feature".into()));
        }
        if values.len() % n_features != 0 {
            return Err(Error::Schema(format!(
                "buffer of {} values is not a multiple of {} features",
                values.len(),
                n_features
            )));
        }
        let n_samples = values.len() / n_features;
        if feature_names.len() != n_features {
            return Err(Error::Schema(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n_features
            )));
        }
        check_names(&feature_names)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at row {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n_samples {
                return Err(Error::Schema(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    n_samples
                )));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::Schema("labels must be 0 or 1".into()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            values,
            n_samples,
            n_features,
            feature_names,
            labels,
        })
    }

    /// Convenience constructor with generated names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<T>], labels: Option<Vec<u8>>) -> Result<Self> {
        let n_features = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Schema("rows have different lengths".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        let names = default_feature_names(n_features);
        Self::new("unnamed", values, n_features, names, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Fraction of rows labelled anomalous, if labels are present.
    pub fn prevalence(&self) -> Option<f64> {
        self.labels.as_ref().map(|l| {
            l.iter().filter(|&&v| v == 1).count() as f64 / self.n_samples.max(1) as f64
        })
    }

    /// Copy containing only the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset<T> {
        let mut values = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            name: self.name.clone(),
            values,
            n_samples: idx.len(),
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Copy restricted to the given feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Dataset<T>> {
        if features.is_empty() {
            return Err(Error::Domain("feature selection is empty".into()));
        }
        if let Some(&bad) = features.iter().find(|&&j| j >= self.n_features) {
            return Err(Error::Index(format!(
                "feature {bad} out of range for {} features",
                self.n_features
            )));
        }
        let mut values = Vec::with_capacity(self.n_samples * features.len());
        for r in self.rows() {
            values.extend(features.iter().map(|&j| r[j]));
        }
        let names = features
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        Dataset::new(
            self.name.clone(),
            values,
            features.len(),
            names,
            self.labels.clone(),
        )
    }

    /// Writes the dataset as CSV; labels, when present, go to a trailing
    /// `label_column`.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = self.feature_names.join(",");
        if self.labels.is_some() {
            line.push(',');
            line.push_str(label_column);
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        for (i, r) in self.rows().enumerate() {
            line.clear();
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.as_f64().to_string());
            }
            if let Some(l) = &self.labels {
                line.push(',');
                line.push_str(if l[i] == 1 { "1" } else { "0" });
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn default_feature_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn check_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.trim().is_empty() {
            return Err(Error::Schema("empty feature name".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Schema(format!("duplicate feature name {n:?}")));
        }
    }
    Ok(())
}

/// Reads a comma-separated file with a mandatory header row.
///
/// When `label_column` is given it is removed from the features and must
/// contain only `0` and `1`. Any non-numeric or non-finite cell is a
/// [`Error::Parse`] naming the row and column.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    check_names(&header)?;

    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("label column {name:?} not found")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = feature_names.len();

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            let value = parsed.ok_or_else(|| Error::Parse {
                row,
                column: header[j].clone(),
                token: cell.to_string(),
            })?;
            if Some(j) == label_idx {
                let label = match value {
                    v if v == 0.0 => 0u8,
                    v if v == 1.0 => 1u8,
                    _ => {
                        return Err(Error::Schema(format!(
                            "label column {:?} is not binary (row {row}: {cell:?})",
                            header[j]
                        )))
                    }
                };
                labels.as_mut().expect("label vector exists").push(label);
            } else {
                values.push(T::from_f64_lossy(value));
            }
        }
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, values, p, feature_names, labels)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("malformed csv: {other:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitScheme {
    /// Seeded permutation of the rows.
    Random,
    /// Keeps row order; the first `floor(n * fraction)` rows train.
    Sequential,
}

/// Splits into disjoint `(train, test)` sets covering every row.
pub fn split<T: Scalar>(
    d: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
    scheme: SplitScheme,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let n = d.n_samples();
    if n < 2 {
        return Err(Error::Domain(format!("cannot split {n} samples")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 || cut == n {
        return Err(Error::Domain(format!(
            "train fraction {train_fraction} leaves an empty side for n = {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if scheme == SplitScheme::Random {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok((d.select_rows(&idx[..cut]), d.select_rows(&idx[cut..])))
}

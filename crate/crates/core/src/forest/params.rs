use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Split model used when growing trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Axis-aligned splits (classic isolation forest).
    #[serde(rename = "if")]
    If,
    /// Oblique hyperplanes with the intercept drawn inside the node bounding box.
    #[serde(rename = "eif")]
    Eif,
    /// Oblique hyperplanes with a Gaussian intercept around the node's
    /// projected mean.
    #[serde(rename = "eif+")]
    EifPlus,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::If => "if",
            Mode::Eif => "eif",
            Mode::EifPlus => "eif+",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "if" => Ok(Mode::If),
            "eif" => Ok(Mode::Eif),
            "eif+" | "eifplus" | "eif_plus" => Ok(Mode::EifPlus),
            other => Err(Error::Domain(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxDepth {
    /// `ceil(log2(sample_size))`.
    Auto,
    Fixed(usize),
}

impl MaxDepth {
    pub fn resolve(self, sample_size: usize) -> usize {
        match self {
            MaxDepth::Auto => (sample_size.max(2) as f64).log2().ceil() as usize,
            MaxDepth::Fixed(d) => d,
        }
    }
}

impl FromStr for MaxDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(MaxDepth::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .map(MaxDepth::Fixed)
            .ok_or_else(|| Error::Domain(format!("max depth must be a positive integer or auto, got {s:?}")))
    }
}

/// Assumed anomaly fraction used to turn scores into binary labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contamination {
    /// Labelled prevalence of the training set.
    Auto,
    Fixed(f64),
}

impl Contamination {
    pub fn validate(self) -> Result<()> {
        match self {
            Contamination::Fixed(c) if !(c > 0.0 && c <= 0.5) => Err(Error::Domain(format!(
                "contamination {c} outside (0, 0.5]"
            ))),
            _ => Ok(()),
        }
    }
}

impl FromStr for Contamination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Contamination::Auto);
        }
        let c = s
            .parse::<f64>()
            .map_err(|_| Error::Domain(format!("invalid contamination {s:?}")))?;
        let c = Contamination::Fixed(c);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Rows drawn (without replacement) per tree; clamped to the dataset size.
    pub sample_size: usize,
    pub max_depth: MaxDepth,
    pub mode: Mode,
    /// Spread multiplier of the EIF+ intercept distribution.
    pub eta: f64,
    pub contamination: Contamination,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            sample_size: 256,
            max_depth: MaxDepth::Auto,
            mode: Mode::EifPlus,
            eta: 1.5,
            contamination: Contamination::Auto,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_sample_size(mut self, sample_size: usize) -> Self {
        self.sample_size = sample_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_contamination(mut self, contamination: Contamination) -> Self {
        self.contamination = contamination;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Domain("n_trees must be positive".into()));
        }
        if self.sample_size < 2 {
            return Err(Error::Domain("sample_size must be at least 2".into()));
        }
        if let MaxDepth::Fixed(0) = self.max_depth {
            return Err(Error::Domain("max_depth must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!("eta must be positive, got {}", self.eta)));
        }
        self.contamination.validate()
    }
}

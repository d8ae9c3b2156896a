//! Synthetic benchmarks with known anomaly-inducing features.
//!
//! * `xy_axis`: Gaussian inlier blob at the origin of features (0, 1); two
//!   equal-sized outlier clusters displaced by `offset`, one along feature 0
//!   and one along feature 1. Each cluster is detectable from its own feature.
//! * `half_moon`: inliers on a noisy circular arc of radius `moon_radius`
//!   spanning 240 degrees, opening towards the (+, +) diagonal. The outlier
//!   blob sits on that diagonal between the two horns, at `moon_gap` times
//!   the radius from the arc centre. Each horn is nearly parallel to one
//!   axis there, so on either feature alone the blob projects onto a dense
//!   stretch of the inlier marginal; only the pair separates it.
//!
//! Extra distractor features are i.i.d. standard Gaussian for every row.
//! Rows are shuffled; labels mark outliers with 1.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{default_feature_names, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    XyAxis,
    HalfMoon,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::XyAxis => "xy_axis",
            SynthKind::HalfMoon => "half_moon",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy_axis" => Ok(SynthKind::XyAxis),
            "half_moon" => Ok(SynthKind::HalfMoon),
            other => Err(Error::Domain(format!("unknown synthetic dataset {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub n_noise_features: usize,
    pub seed: u64,
    /// Distance of the xy_axis outlier clusters from the origin.
    pub offset: f64,
    /// Standard deviation of each outlier cluster / blob.
    pub outlier_std: f64,
    pub moon_radius: f64,
    /// Standard deviation of the radial noise around the arc.
    pub moon_width: f64,
    /// Distance of the blob centre from the arc centre, in radii.
    pub moon_gap: f64,
}

/// Arc spanned by the half_moon inliers, 105 to 345 degrees.
const MOON_START: f64 = 7.0 * PI / 12.0;
const MOON_END: f64 = 23.0 * PI / 12.0;

impl SynthSpec {
    pub fn new(kind: SynthKind) -> Self {
        SynthSpec {
            kind,
            n_inliers: 1000,
            n_outliers: 50,
            n_noise_features: 4,
            seed: 0,
            offset: 8.0,
            outlier_std: match kind {
                SynthKind::XyAxis => 1.0,
                SynthKind::HalfMoon => 1.5,
            },
            moon_radius: 16.0,
            moon_width: 0.3,
            moon_gap: 0.9,
        }
    }

    pub fn xy_axis() -> Self {
        Self::new(SynthKind::XyAxis)
    }

    pub fn half_moon() -> Self {
        Self::new(SynthKind::HalfMoon)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise_features(mut self, n: usize) -> Self {
        self.n_noise_features = n;
        self
    }

    pub fn n_features(&self) -> usize {
        2 + self.n_noise_features
    }

    /// Fraction of generated rows that are outliers.
    pub fn prevalence(&self) -> f64 {
        self.n_outliers as f64 / (self.n_inliers + self.n_outliers) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_inliers == 0 || self.n_outliers == 0 {
            return Err(Error::Domain("need at least one inlier and one outlier".into()));
        }
        for (name, v) in [
            ("offset", self.offset),
            ("outlier_std", self.outlier_std),
            ("moon_radius", self.moon_radius),
            ("moon_width", self.moon_width),
            ("moon_gap", self.moon_gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which xy_axis cluster an outlier row belongs to, derived from the
/// generated geometry: the feature along which it is displaced more.
pub fn xy_axis_cluster(row: &[f64]) -> usize {
    usize::from(row[1] > row[0])
}

pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.n_features();
    let gauss = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(spec.n_inliers + spec.n_outliers);
    for _ in 0..spec.n_inliers {
        let (a, b) = match spec.kind {
            SynthKind::XyAxis => (gauss(&mut rng), gauss(&mut rng)),
            SynthKind::HalfMoon => {
                let theta = rng.random_range(MOON_START..MOON_END);
                let r = spec.moon_radius + spec.moon_width * gauss(&mut rng);
                (r * theta.cos(), r * theta.sin())
            }
        };
        rows.push((vec![a, b], 0));
    }
    for k in 0..spec.n_outliers {
        let (a, b) = match spec.kind {
            SynthKind::XyAxis => {
                let (da, db) = (spec.outlier_std * gauss(&mut rng), spec.outlier_std * gauss(&mut rng));
                if k % 2 == 0 {
                    (spec.offset + da, db)
                } else {
                    (da, spec.offset + db)
                }
            }
            SynthKind::HalfMoon => {
                let centre = spec.moon_gap * spec.moon_radius * FRAC_1_SQRT_2;
                (
                    centre + spec.outlier_std * gauss(&mut rng),
                    centre + spec.outlier_std * gauss(&mut rng),
                )
            }
        };
        rows.push((vec![a, b], 1));
    }
    for (row, _) in rows.iter_mut() {
        row.extend((0..spec.n_noise_features).map(|_| gauss(&mut rng)));
    }
    rows.shuffle(&mut rng);

    let labels = rows.iter().map(|(_, l)| *l).collect();
    let values = rows
        .iter()
        .flat_map(|(r, _)| r.iter().map(|&v| T::from_f64_lossy(v)))
        .collect();
    Dataset::new(spec.kind.to_string(), values, p, default_feature_names(p), Some(labels))
}

/// Unlabelled i.i.d. standard Gaussian data of shape `n x p`, used for
/// timing runs at a given scale.
pub fn gaussian_noise<T: Scalar>(n: usize, p: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("noise data needs a positive shape, got {n} x {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * p)
        .map(|_| T::from_f64_lossy(StandardNormal.sample(&mut rng)))
        .collect();
    Dataset::new("gaussian_noise".to_string(), values, p, default_feature_names(p), None)
}

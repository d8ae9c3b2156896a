use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exiffi_core::{Contamination, ForestParams, MaxDepth, Mode, SplitScheme, SynthKind};
use serde::{Deserialize, Serialize};

/// Isolation forests with ExIFFI explanations.
///
/// Every flag can also be set through an `EXIFFI_*` environment variable
/// (shown in each flag's help); an explicit flag wins over the environment.
#[derive(Parser, Debug)]
#[command(name = "exiffi", version)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism. Outputs do not
    /// depend on it.
    #[arg(long, global = true, env = "EXIFFI_THREADS")]
    pub threads: Option<usize>,

    /// Output directory [default: exiffi-out, or <manifest dir>/replay for replay].
    #[arg(long, global = true, env = "EXIFFI_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic benchmark as CSV.
    Synth(SynthArgs),
    /// Pairwise correlation and mutual-information profile of a dataset.
    Profile(ProfileArgs),
    /// Train a forest, write the model, scores and a metric report.
    Fit(FitArgs),
    /// Local, global or scoremap explanations from a saved model.
    Explain(ExplainArgs),
    /// Feature-selection proxy curves for a ranking.
    Fs(FsArgs),
    /// Hyperparameter sweeps.
    Ablate(AblateArgs),
    /// Timing of fit, batch predict and single-sample explanation.
    Bench(BenchArgs),
    /// Re-run a command from its manifest.json.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Profile(_) => "profile",
            Command::Fit(_) => "fit",
            Command::Explain(_) => "explain",
            Command::Fs(_) => "fs",
            Command::Ablate(_) => "ablate",
            Command::Bench(_) => "bench",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InputArgs {
    /// CSV with a header row and numeric cells.
    #[arg(long, env = "EXIFFI_INPUT")]
    pub input: PathBuf,

    /// Name of the 0/1 label column (1 = anomaly).
    #[arg(long, env = "EXIFFI_LABEL_COL")]
    pub label_col: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SplitArgs {
    /// Separate test CSV; when absent the input is split.
    #[arg(long, env = "EXIFFI_TEST")]
    pub test: Option<PathBuf>,

    #[arg(long, default_value_t = 0.5, env = "EXIFFI_TRAIN_FRACTION")]
    pub train_fraction: f64,

    #[arg(long, value_enum, default_value_t = SplitArg::Random, env = "EXIFFI_SPLIT")]
    pub split: SplitArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Random,
    Sequential,
}

impl From<SplitArg> for SplitScheme {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Random => SplitScheme::Random,
            SplitArg::Sequential => SplitScheme::Sequential,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ForestArgs {
    /// if, eif or eif+.
    #[arg(long, default_value = "eif+", env = "EXIFFI_MODE")]
    pub mode: Mode,

    #[arg(long, default_value_t = 100, env = "EXIFFI_TREES")]
    pub trees: usize,

    #[arg(long, default_value_t = 256, env = "EXIFFI_SAMPLE_SIZE")]
    pub sample_size: usize,

    /// Positive integer or auto (ceil(log2(sample size))).
    #[arg(long, default_value = "auto", env = "EXIFFI_MAX_DEPTH")]
    pub max_depth: MaxDepth,

    /// Spread of the EIF+ intercept distribution.
    #[arg(long, default_value_t = 1.5, env = "EXIFFI_ETA")]
    pub eta: f64,

    /// Anomaly fraction in (0, 0.5], or auto (training label prevalence).
    #[arg(long, default_value = "auto", env = "EXIFFI_CONTAMINATION")]
    pub contamination: Contamination,

    #[arg(long, default_value_t = 0, env = "EXIFFI_SEED")]
    pub seed: u64,
}

impl ForestArgs {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            sample_size: self.sample_size,
            max_depth: self.max_depth,
            mode: self.mode,
            eta: self.eta,
            contamination: self.contamination,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, env = "EXIFFI_KIND")]
    pub kind: KindArg,

    #[arg(long, default_value_t = 0, env = "EXIFFI_SEED")]
    pub seed: u64,

    #[arg(long, default_value_t = 1000)]
    pub n_inliers: usize,

    #[arg(long, default_value_t = 50)]
    pub n_outliers: usize,

    /// Extra i.i.d. Gaussian distractor features.
    #[arg(long, default_value_t = 4)]
    pub noise_features: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    #[value(name = "xy_axis")]
    XyAxis,
    #[value(name = "half_moon")]
    HalfMoon,
}

impl From<KindArg> for SynthKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::XyAxis => SynthKind::XyAxis,
            KindArg::HalfMoon => SynthKind::HalfMoon,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Pairs with |rho| below this count as weakly correlated.
    #[arg(long, default_value_t = 0.05)]
    pub corr_threshold: f64,

    #[arg(long, default_value_t = 16)]
    pub mi_bins: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainKind {
    Local,
    Global,
    Scoremap,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[arg(value_enum)]
    pub kind: ExplainKind,

    /// Model file written by `fit`.
    #[arg(long, env = "EXIFFI_MODEL")]
    pub model: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    /// Rows to explain (0-based, comma separated); all rows when absent.
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,

    /// Global: mark the top fraction of scores as outliers instead of using
    /// labels or the model's own threshold.
    #[arg(long)]
    pub outlier_fraction: Option<f64>,

    /// Global: number of features in the top-k CSV.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,

    #[arg(long, default_value_t = 0)]
    pub feat_i: usize,

    #[arg(long, default_value_t = 1)]
    pub feat_j: usize,

    /// Scoremap lattice points per axis.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub forest: ForestArgs,

    /// Number of seeds per curve point (and GFI runs when no ranking is given).
    #[arg(long, default_value_t = 5, env = "EXIFFI_SEEDS")]
    pub seeds: usize,

    /// CSV with a single column of feature indices, most important first.
    /// When absent the ranking is the GFI of the training split.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblateParam {
    Trees,
    MaxDepth,
    SampleSize,
    Contamination,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblateMetric {
    #[value(name = "roc_auc")]
    RocAuc,
    #[value(name = "auc_fs")]
    AucFs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub forest: ForestArgs,

    #[arg(long, default_value_t = 5, env = "EXIFFI_SEEDS")]
    pub seeds: usize,

    #[arg(long, value_enum)]
    pub param: AblateParam,

    /// Grid values (comma separated). The contamination default is 9
    /// log-spaced points from c/8 to 8c around the training prevalence c.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,

    /// Metric of the contamination sweep.
    #[arg(long, value_enum, default_value_t = AblateMetric::RocAuc)]
    pub metric: AblateMetric,

    /// Seeds of each feature-selection run inside an auc_fs sweep.
    #[arg(long, default_value_t = 1)]
    pub fs_seeds: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Data to time on; random Gaussian data of --random-rows x --random-cols
    /// when absent.
    #[arg(long, env = "EXIFFI_INPUT")]
    pub input: Option<PathBuf>,

    #[arg(long, env = "EXIFFI_LABEL_COL")]
    pub label_col: Option<String>,

    #[arg(long, default_value_t = 36_000)]
    pub random_rows: usize,

    #[arg(long, default_value_t = 52)]
    pub random_cols: usize,

    /// Time an existing model instead of fitting inline (fit is then not timed).
    #[arg(long, env = "EXIFFI_MODEL")]
    pub model: Option<PathBuf>,

    #[arg(long, default_value_t = 10)]
    pub repeats: usize,

    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

//! Isolation-forest anomaly detectors (IF, EIF, EIF+) with ExIFFI local and
//! global feature-importance explanations, plus the evaluation machinery
//! around them: detection metrics, the feature-selection proxy task,
//! hyperparameter sweeps and synthetic benchmarks.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the precision for the common cases.
//!
//! ```
//! use exiffi_core::{generate, local_importance, Forest64, ForestParams, SynthSpec};
//!
//! let data = generate::<f64>(&SynthSpec::xy_axis()).unwrap();
//! let forest = Forest64::fit(&data, &ForestParams::default().with_trees(50)).unwrap();
//! let imp = local_importance(&forest, data.row(0)).unwrap();
//! assert_eq!(imp.lfi.len(), data.n_features());
//! ```

pub mod ablation;
pub mod data;
mod error;
pub mod exiffi;
pub mod forest;
pub mod fs_proxy;
pub mod metrics;
pub mod profile;
mod scalar;
pub mod seeds;
pub mod synth;

pub use data::{load_csv, split, Dataset, SplitScheme};
pub use error::{Error, Result};
pub use exiffi::{
    global_importance, global_importance_runs, local_importance, local_importance_batch,
    local_scoremap, node_lambda, GfiResult, ImportanceVector, OutlierSet, Scoremap,
};
pub use forest::{
    average_path_length, load_model, save_model, Contamination, Forest, ForestParams, MaxDepth,
    Mode, Node, Split, Tree,
};
pub use fs_proxy::{auc_fs, run_feature_selection, FsCurve, FsPoint, FsResult, Strategy};
pub use metrics::{average_precision, precision_at_contamination, roc_auc, MetricReport};
pub use profile::{profile_dependencies, DependencyProfile};
pub use scalar::Scalar;
pub use synth::{generate, SynthKind, SynthSpec};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type ImportanceVector64 = ImportanceVector<f64>;
pub type ImportanceVector32 = ImportanceVector<f32>;

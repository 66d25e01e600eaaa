//! Benchmark harness: datasets, experiment runs, metrics and statistics.

mod dataset;
mod experiment;
pub mod metrics;
pub mod stats;

pub use dataset::{
    load_dataset, Dataset, DatasetEntry, DatasetError, Manifest, ManifestEntry, ParseWarning,
    ProgramCategory, MANIFEST_FILE,
};
pub use experiment::{
    aggregate, feature_rows, read_records, render_summary, run_experiment, run_experiment_with,
    ConfigAggregate, ExperimentConfig, ExperimentError, ExperimentReport, NamedConfig,
    ProgramRecord, RunOptions,
};
pub use metrics::{extra_loc_percent, first_success, mean, pass_at_k};
pub use stats::{
    design_matrix, fit_logistic, gradient, log_likelihood, lr_test, objective, roc_auc, roc_curve,
    Design, Feature, FeatureRow, FitOptions, LrTest, ModelSpec, RegressionFit, StatsError,
};

//! End-to-end experiment: data preparation, collaborative model tuning, QUBO
//! construction over a hyperparameter grid, feature selection, content-based
//! model tuning on cold items and final evaluation.

pub mod baselines;
pub mod config;
pub mod run;
pub mod search;
pub mod stages;

pub use baselines::{baseline_random_selection, baseline_tfidf_selection, feature_selection_stats};
pub use config::ExperimentConfig;
pub use run::{run_pipeline, Pipeline, PipelineRun};
pub use search::random_search;

//! Experiment orchestration: configuration loading and the pipeline
//! commands behind the `lemmata` binary.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compare, cmd_induce, cmd_ingest, cmd_report, cmd_run, cmd_run_with, cmd_score, cmd_split, cmd_train_baseline,
    RunDiagnostics, RunSummary, ScoreSummary,
};
pub use config::{Experiment, ExperimentConfig};

//! Experiment runner: configuration files, preset experiments and
//! baselines, metrics, run comparison and SVG plots.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod plot;

pub use config::{Baseline, DataSource, EvalConfig, ExperimentConfig};
pub use experiment::{run_experiment, RunSummary};

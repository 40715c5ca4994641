//! Monte Carlo experiment engine: configuration, trials, aggregation and
//! result files.

pub mod config;
mod experiment;
mod output;
pub mod stats;
mod trial;

pub use config::{parse_override, DetectorKind, ExperimentConfig, LmmseQuantNoise, OneBitSteps, SweepVariable};
pub use experiment::{
    config_sha256, run_convergence, run_experiment, run_experiment_with, run_steering_scan, trial_rng, Execution,
    SerCurve, SerPoint,
};
pub use output::{emit_results, output_paths, ResultFiles, CSV_HEADER};
pub use stats::{wilson_interval, Z_95};
pub use trial::{run_convergence_trial, run_trial, ConvergenceCounts, Scenario, Stages, TrialCounts};

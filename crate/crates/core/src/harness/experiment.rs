//! Sweeps: every grid point runs the same seeded trials, in parallel or not,
//! and the per-trial counts are summed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::{DetectorKind, ExperimentConfig, SweepVariable};
use super::stats::{wilson_interval, Z_95};
use super::trial::{run_convergence_trial, run_trial, ConvergenceCounts, Scenario, TrialCounts};

/// How trials are scheduled. Results do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Random stream of one trial. Every grid point reuses the same streams, so
/// neighbouring points see the same channels and symbols.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub sweep_value: f64,
    pub detector: DetectorKind,
    pub errors: u64,
    pub symbols: u64,
    pub trials: u64,
    /// Symbol vectors on which the detector returned an error.
    pub failures: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SerPoint {
    pub fn new(
        sweep_value: f64,
        detector: DetectorKind,
        errors: u64,
        symbols: u64,
        trials: u64,
        failures: u64,
    ) -> Self {
        let ser = if symbols == 0 {
            0.0
        } else {
            errors as f64 / symbols as f64
        };
        let (ci_low, ci_high) = wilson_interval(errors, symbols, Z_95);
        Self {
            sweep_value,
            detector,
            errors,
            symbols,
            trials,
            failures,
            ser,
            ci_low,
            ci_high,
        }
    }

    pub fn ci(&self) -> (f64, f64) {
        (self.ci_low, self.ci_high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub experiment: String,
    pub sweep: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub detectors: Vec<DetectorKind>,
    /// Grid-major: all detectors of the first sweep value, then the next.
    pub points: Vec<SerPoint>,
    /// Quantizer overload events per grid point, summed over both orders.
    pub overloads: Vec<u64>,
    pub config_sha256: String,
    pub version: String,
}

impl SerCurve {
    pub fn point(&self, sweep_value: f64, detector: DetectorKind) -> Option<&SerPoint> {
        self.points
            .iter()
            .find(|p| p.sweep_value == sweep_value && p.detector == detector)
    }

    /// SER values of one detector in grid order.
    pub fn series(&self, detector: DetectorKind) -> Vec<&SerPoint> {
        self.points.iter().filter(|p| p.detector == detector).collect()
    }
}

/// Hex SHA-256 of the compact JSON form of the configuration.
pub fn config_sha256(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(&config.to_json()).expect("config is serializable");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn version() -> String {
    format!("sdmimo {}", env!("CARGO_PKG_VERSION"))
}

fn map_trials<A, F>(trials: usize, exec: Execution, f: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(u64) -> Result<A> + Sync + Send,
{
    match exec {
        Execution::Parallel => (0..trials as u64).into_par_iter().map(f).collect(),
        Execution::Serial => (0..trials as u64).map(f).collect(),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SerCurve> {
    run_experiment_with(config, Execution::Parallel)
}

/// Runs every detector at every grid point over `config.trials` channels.
pub fn run_experiment_with(config: &ExperimentConfig, exec: Execution) -> Result<SerCurve> {
    config.validate()?;
    let grid = config.grid();
    let dets = &config.detectors;
    let mut points = Vec::with_capacity(grid.len() * dets.len());
    let mut overloads = Vec::with_capacity(grid.len());
    for &value in &grid {
        let scenario = Scenario::at(config, value)?;
        let per_trial = map_trials(config.trials, exec, |t| {
            run_trial(
                &scenario,
                dets,
                config.symbols_per_trial,
                &mut trial_rng(config.seed, t),
            )
        })?;
        let total = per_trial
            .iter()
            .fold(TrialCounts::zeros(dets.len()), |acc, c| acc.merge(c));
        for (i, &d) in dets.iter().enumerate() {
            points.push(SerPoint::new(
                value,
                d,
                total.errors[i],
                total.symbols[i],
                config.trials as u64,
                total.failures[i],
            ));
        }
        overloads.push(total.overloads);
    }
    Ok(SerCurve {
        experiment: config.experiment.clone(),
        sweep: config.sweep,
        sweep_values: grid,
        detectors: dets.clone(),
        points,
        overloads,
        config_sha256: config_sha256(config),
        version: version(),
    })
}

/// SER against the Σ∆ steering angle with the user sector held fixed.
pub fn run_steering_scan(config: &ExperimentConfig, exec: Execution) -> Result<SerCurve> {
    if config.sweep != SweepVariable::SteeringDeg {
        return Err(Error::Config(format!(
            "steering scan needs sweep = \"steering_deg\", got \"{}\"",
            config.sweep.name()
        )));
    }
    run_experiment_with(config, exec)
}

/// SER after each of `max_iters` iterations of the iterative detectors, at
/// the single configured point. The sweep variable of the result is the
/// iteration number, starting at 1.
pub fn run_convergence(config: &ExperimentConfig, exec: Execution) -> Result<SerCurve> {
    config.validate()?;
    let grid = config.grid();
    if grid.len() != 1 {
        return Err(Error::Config(format!(
            "convergence runs at one point; the {} grid has {} values",
            config.sweep.name(),
            grid.len()
        )));
    }
    let scenario = Scenario::first(config)?;
    let dets: Vec<DetectorKind> = config.detectors.iter().copied().filter(|d| d.is_iterative()).collect();
    let iters = config.max_iters;
    let per_trial = map_trials(config.trials, exec, |t| {
        run_convergence_trial(
            &scenario,
            &dets,
            config.symbols_per_trial,
            &mut trial_rng(config.seed, t),
        )
    })?;
    let total = per_trial
        .iter()
        .fold(ConvergenceCounts::zeros(dets.len(), iters), |acc, c| acc.merge(c));
    let sweep_values: Vec<f64> = (1..=iters).map(|t| t as f64).collect();
    let mut points = Vec::with_capacity(iters * dets.len());
    for (t, &it) in sweep_values.iter().enumerate() {
        for (i, &d) in dets.iter().enumerate() {
            points.push(SerPoint::new(
                it,
                d,
                total.errors[i][t],
                total.symbols,
                config.trials as u64,
                0,
            ));
        }
    }
    Ok(SerCurve {
        experiment: config.experiment.clone(),
        sweep: SweepVariable::Iteration,
        overloads: vec![0; sweep_values.len()],
        sweep_values,
        detectors: dets,
        points,
        config_sha256: config_sha256(config),
        version: version(),
    })
}

//! CSV table plus JSON sidecar for each result set.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::SerCurve;

pub const CSV_HEADER: [&str; 7] = [
    "sweep_value",
    "detector",
    "errors",
    "symbols",
    "ser",
    "ci_low",
    "ci_high",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// `{dir}/{experiment}-{seed}.csv` and the matching `.json`.
pub fn output_paths(dir: &Path, config: &ExperimentConfig) -> ResultFiles {
    let stem = format!("{}-{}", config.experiment, config.seed);
    ResultFiles {
        csv: dir.join(format!("{stem}.csv")),
        json: dir.join(format!("{stem}.json")),
    }
}

/// Writes the curve as CSV (one row per sweep value and detector) and a
/// sidecar holding the resolved configuration that produced it.
pub fn emit_results(curve: &SerCurve, config: &ExperimentConfig, dir: &Path) -> Result<ResultFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = output_paths(dir, config);

    let csv_err = |e: csv::Error| Error::Csv {
        path: files.csv.clone(),
        source: e,
    };
    let mut w = csv::Writer::from_path(&files.csv).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([
            p.sweep_value.to_string(),
            p.detector.to_string(),
            p.errors.to_string(),
            p.symbols.to_string(),
            p.ser.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&files.csv, e))?;

    let sidecar = json!({
        "config": config.to_json(),
        "config_sha256": curve.config_sha256,
        "version": curve.version,
        "sweep": curve.sweep,
        "sweep_values": curve.sweep_values,
        "overloads": curve.overloads,
        "summary": curve.points,
    });
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Serialize(e.to_string()))?;
    fs::write(&files.json, text + "\n").map_err(|e| Error::io(&files.json, e))?;
    Ok(files)
}

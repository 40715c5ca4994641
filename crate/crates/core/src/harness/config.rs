//! Flat, typed experiment configuration.
//!
//! Files are TOML (or the JSON sidecar written next to every result set).
//! `key=value` overrides are parsed as TOML values and merged before
//! deserialization, so unknown keys are rejected by name either way.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::ColumnNormalization;
use crate::constellation::Modulation;
use crate::detectors::TailDivisor;
use crate::error::{Error, Result};
use crate::frontend::MAX_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Linear receiver on the first-order Σ∆ output.
    Lmmse,
    Sdvb1,
    Sdvb2,
    /// Linear receiver on unquantized samples; reference curve only.
    LmmseUnquantized,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Lmmse,
        DetectorKind::Sdvb1,
        DetectorKind::Sdvb2,
        DetectorKind::LmmseUnquantized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::Sdvb1 => "sdvb1",
            DetectorKind::Sdvb2 => "sdvb2",
            DetectorKind::LmmseUnquantized => "lmmse-unquantized",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, DetectorKind::Sdvb1 | DetectorKind::Sdvb2)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown detector `{s}`")))
    }
}

/// The quantity varied along a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    Bits,
    SpacingOverWavelength,
    SteeringDeg,
    SectorSpreadDeg,
    SectorCenterDeg,
    NumAntennas,
    NumUsers,
    /// Detector iteration index (convergence runs only).
    Iteration,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::Bits => "bits",
            SweepVariable::SpacingOverWavelength => "spacing_over_wavelength",
            SweepVariable::SteeringDeg => "steering_deg",
            SweepVariable::SectorSpreadDeg => "sector_spread_deg",
            SweepVariable::SectorCenterDeg => "sector_center_deg",
            SweepVariable::NumAntennas => "num_antennas",
            SweepVariable::NumUsers => "num_users",
            SweepVariable::Iteration => "iteration",
        }
    }
}

/// Step sizes for one-bit arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OneBitSteps {
    /// Per-antenna steps tracking the growing first-order feedback power.
    #[default]
    BussgangAdaptive,
    /// One step for all antennas from the input power.
    Fixed,
}

/// Quantization-noise model fed to the linear receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmmseQuantNoise {
    /// One-bit recursion at `b = 1`, uniform `Λ²/6` above.
    #[default]
    Auto,
    OneBitRecursion,
    UniformStep,
}

fn default_experiment() -> String {
    "ser-sweep".into()
}
fn default_antennas() -> usize {
    64
}
fn default_users() -> usize {
    8
}
fn default_paths() -> usize {
    20
}
fn default_spacing() -> f64 {
    1.0 / 6.0
}
fn default_spread() -> f64 {
    40.0
}
fn default_one() -> f64 {
    1.0
}
fn default_bits() -> u32 {
    3
}
fn default_snr() -> Vec<f64> {
    vec![12.0]
}
fn default_detectors() -> Vec<DetectorKind> {
    vec![DetectorKind::Lmmse, DetectorKind::Sdvb1, DetectorKind::Sdvb2]
}
fn default_trials() -> usize {
    20
}
fn default_symbols() -> usize {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_max_iters() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-5
}
fn default_hyper() -> f64 {
    1e-6
}
fn default_step_scale() -> f64 {
    2.5
}
fn default_zeta() -> f64 {
    1.13
}
fn default_lna() -> f64 {
    50.0
}
fn default_temperature() -> f64 {
    290.0
}
fn default_bandwidth() -> f64 {
    20e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in output file names.
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default = "default_antennas")]
    pub num_antennas: usize,
    #[serde(default = "default_users")]
    pub num_users: usize,
    #[serde(default = "default_paths")]
    pub num_paths: usize,
    #[serde(default = "default_spacing")]
    pub spacing_over_wavelength: f64,
    #[serde(default)]
    pub sector_center_deg: f64,
    #[serde(default = "default_spread")]
    pub sector_spread_deg: f64,
    /// Large-scale gain shared by all users.
    #[serde(default = "default_one")]
    pub large_scale_gain: f64,
    #[serde(default)]
    pub normalization: ColumnNormalization,
    #[serde(default = "default_modulation")]
    pub constellation: Modulation,
    #[serde(default = "default_bits")]
    pub bits: u32,
    /// Resolution of the linear receiver's array; defaults to `bits`.
    #[serde(default)]
    pub lmmse_bits: Option<u32>,
    /// Σ∆ steering angle; defaults to the sector center.
    #[serde(default)]
    pub steering_deg: Option<f64>,
    /// SNR grid when sweeping `snr_db`, otherwise a single value. Accepts
    /// `inf` for a noiseless run.
    #[serde(default = "default_snr", with = "extended_floats")]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub coupling: bool,
    #[serde(default = "default_lna")]
    pub lna_impedance_ohm: f64,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_symbols")]
    pub symbols_per_trial: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sweep")]
    pub sweep: SweepVariable,
    /// Grid for any sweep variable other than `snr_db`.
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_hyper")]
    pub gamma_alpha: f64,
    #[serde(default = "default_hyper")]
    pub gamma_beta: f64,
    #[serde(default)]
    pub tail_divisor: TailDivisor,
    /// `c` in `Λ = c·rms/2^{b−1}` for `b ≥ 2`.
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(default)]
    pub one_bit_steps: OneBitSteps,
    #[serde(default)]
    pub lmmse_quant_noise: LmmseQuantNoise,
    /// Correction factor of the coupled one-bit noise model.
    #[serde(default = "default_zeta")]
    pub zeta: f64,
}

fn default_modulation() -> Modulation {
    Modulation::Qpsk
}
fn default_sweep() -> SweepVariable {
    SweepVariable::SnrDb
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    /// Points of the swept variable, in order.
    pub fn grid(&self) -> Vec<f64> {
        match self.sweep {
            SweepVariable::SnrDb => self.snr_db.clone(),
            _ => self.sweep_values.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.experiment.is_empty()
            || self
                .experiment
                .chars()
                .any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.'))
        {
            return bad(format!(
                "experiment name `{}` must be a plain file-name stem",
                self.experiment
            ));
        }
        if self.num_antennas < 2 {
            return bad("num_antennas must be at least 2".into());
        }
        if self.num_users == 0 || self.num_paths == 0 {
            return bad("num_users and num_paths must be at least 1".into());
        }
        if !(self.spacing_over_wavelength > 0.0) {
            return bad("spacing_over_wavelength must be positive".into());
        }
        if !(self.sector_spread_deg >= 0.0) {
            return bad("sector_spread_deg must be nonnegative".into());
        }
        if !(self.large_scale_gain > 0.0) {
            return bad("large_scale_gain must be positive".into());
        }
        for b in std::iter::once(self.bits).chain(self.lmmse_bits) {
            if !(1..=MAX_BITS).contains(&b) {
                return bad(format!("bit depth {b} outside 1..={MAX_BITS}"));
            }
        }
        if self.trials == 0 || self.symbols_per_trial == 0 {
            return bad("trials and symbols_per_trial must be at least 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.tol >= 0.0) || !(self.gamma_alpha >= 0.0) || !(self.gamma_beta > 0.0) {
            return bad("tol and gamma_alpha must be >= 0 and gamma_beta > 0".into());
        }
        if !(self.step_scale > 0.0) {
            return bad("step_scale must be positive".into());
        }
        if !(self.lna_impedance_ohm > 0.0 && self.temperature_k > 0.0 && self.bandwidth_hz > 0.0) {
            return bad("circuit constants must be positive".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return bad("snr_db needs at least one value".into());
        }
        if self.sweep != SweepVariable::SnrDb && self.snr_db.len() != 1 {
            return bad(format!(
                "snr_db must hold a single value when sweeping {}",
                self.sweep.name()
            ));
        }
        if self.sweep == SweepVariable::Iteration {
            return bad("iteration is not a sweep variable; use the convergence runner".into());
        }
        let grid = self.grid();
        if grid.is_empty() {
            return bad(format!(
                "sweep over {} needs a nonempty sweep_values grid",
                self.sweep.name()
            ));
        }
        if grid.iter().any(|v| !v.is_finite()) && self.sweep != SweepVariable::SnrDb {
            return bad("sweep_values must be finite".into());
        }
        let integral = matches!(
            self.sweep,
            SweepVariable::Bits | SweepVariable::NumAntennas | SweepVariable::NumUsers
        );
        if integral && grid.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return bad(format!("{} must be swept over positive integers", self.sweep.name()));
        }
        let mut seen = Vec::new();
        for d in &self.detectors {
            if seen.contains(d) {
                return bad(format!("detector `{d}` listed twice"));
            }
            seen.push(*d);
        }
        Ok(())
    }

    /// Parses a TOML document (or a JSON config / result sidecar) and applies overrides.
    pub fn from_str_with_overrides(text: &str, json: bool, overrides: &[String]) -> Result<Self> {
        let mut value = if json {
            let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON: {e}")))?;
            // A results sidecar nests the run configuration.
            match v {
                Value::Object(mut m) if m.contains_key("config") && m.contains_key("config_sha256") => {
                    m.remove("config").expect("checked")
                }
                other => other,
            }
        } else {
            let t: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("TOML: {e}")))?;
            toml_to_json(toml::Value::Table(t))
        };
        let Value::Object(map) = &mut value else {
            return Err(Error::Config(
                "configuration must be a table of key = value pairs".into(),
            ));
        };
        for ov in overrides {
            let (k, v) = parse_override(ov)?;
            map.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str_with_overrides(&text, json, overrides)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(e))))
    }

    /// Defaults plus overrides, without a file.
    pub fn from_overrides(overrides: &[String]) -> Result<Self> {
        Self::from_str_with_overrides("", false, overrides)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// `key=value`, value parsed as a TOML literal; bare words become strings.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    let raw = v.trim();
    let doc = format!("v = {raw}");
    let value = match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => toml_to_json(t.remove("v").expect("parsed key")),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

/// Like serde's conversion, except that non-finite floats become the
/// strings `inf`, `-inf` and `nan` instead of JSON `null`.
fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::Float(f) if !f.is_finite() => Value::String(format_extended(f)),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::String(s) => Value::String(s),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

fn format_extended(f: f64) -> String {
    if f.is_nan() {
        "nan".into()
    } else if f > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Float lists whose infinite entries survive a JSON round trip as strings.
mod extended_floats {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&f| {
                if f.is_finite() {
                    Repr::Num(f)
                } else {
                    Repr::Text(super::format_extended(f))
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(f) => Ok(f),
                Repr::Text(t) => t
                    .trim_start_matches('+')
                    .parse::<f64>()
                    .map_err(|_| D::Error::custom(format!("`{t}` is not a number"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_snr_survives_json() {
        let c = ExperimentConfig::from_overrides(&["snr_db=[inf, 3.0]".into()]).unwrap();
        assert_eq!(c.snr_db, vec![f64::INFINITY, 3.0]);
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let back = ExperimentConfig::from_str_with_overrides(&text, true, &[]).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_overrides(&["snr_db=[nan]".into()]).is_err());
    }

    #[test]
    fn defaults_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.grid(), vec![12.0]);
        assert_eq!(c.detectors.len(), 3);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::from_str_with_overrides("snr_dbb = 3", false, &[]).unwrap_err();
        assert!(e.to_string().contains("snr_dbb"), "{e}");
    }

    #[test]
    fn overrides_parse_toml_values() {
        let c = ExperimentConfig::from_overrides(&["snr_db=[0,6,12]".into(), "constellation=16qam".into()]).unwrap();
        assert_eq!(c.snr_db, vec![0.0, 6.0, 12.0]);
        assert_eq!(c.constellation, Modulation::Qam16);
        let c = ExperimentConfig::from_overrides(&["detectors=[\"sdvb2\"]".into(), "coupling=true".into()]).unwrap();
        assert_eq!(c.detectors, vec![DetectorKind::Sdvb2]);
        assert!(c.coupling);
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn sweep_consistency_is_checked() {
        let e = ExperimentConfig::from_overrides(&["sweep=\"bits\"".into()]).unwrap_err();
        assert!(e.to_string().contains("sweep_values"));
        let e = ExperimentConfig::from_overrides(&["sweep=\"bits\"".into(), "sweep_values=[1.5]".into()]).unwrap_err();
        assert!(e.to_string().contains("integers"));
        let e = ExperimentConfig::from_overrides(&["trials=0".into()]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::from_overrides(&["bits=1".into(), "seed=9".into()]).unwrap();
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let back = ExperimentConfig::from_str_with_overrides(&text, true, &[]).unwrap();
        assert_eq!(c, back);
        let sidecar = serde_json::json!({"config": c.to_json(), "config_sha256": "x"}).to_string();
        assert_eq!(
            ExperimentConfig::from_str_with_overrides(&sidecar, true, &[]).unwrap(),
            c
        );
    }
}

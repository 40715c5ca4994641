//! One sweep point resolved into concrete parameters, and the Monte Carlo
//! trial that runs on it.

use num_complex::Complex;
use rand::Rng;

use crate::channel::{
    coupling_matrix, generate_channel, impedance_matrix, noise_covariance, noise_for_snr, AngularSector, ArrayGeometry,
    ChannelRealization, ColumnNormalization, MutualCouplingParams, NoiseModel,
};
use crate::constellation::ConstellationSpec;
use crate::detectors::{DetectorOptions, LmmseDetector, SdVbSolver};
use crate::error::{Error, Result};
use crate::frontend::{
    bussgang_one_bit_schedule, calibrated_step, make_quantizer, quant_noise_cov_mc, quant_noise_profile_1bit,
    quant_noise_uniform, sd_forward, LinearizedModel, QuantizerSpec, SdOrder, SigmaDeltaCapture, StageQuantizer,
};
use crate::linalg::CMatrix;

use super::config::{DetectorKind, ExperimentConfig, LmmseQuantNoise, OneBitSteps, SweepVariable};

/// Fixed or per-antenna quantizers.
#[derive(Debug, Clone)]
pub enum Stages {
    Fixed(QuantizerSpec<f64>),
    Schedule(Vec<QuantizerSpec<f64>>),
}

impl Stages {
    /// Step of the first stage.
    pub fn first_step(&self) -> f64 {
        match self {
            Stages::Fixed(q) => q.step,
            Stages::Schedule(s) => s[0].step,
        }
    }
}

impl StageQuantizer<f64> for Stages {
    fn stage(&self, i: usize) -> Option<&QuantizerSpec<f64>> {
        match self {
            Stages::Fixed(q) => Some(q),
            Stages::Schedule(s) => Some(&s[i]),
        }
    }
}

#[derive(Debug, Clone)]
struct CouplingSetup {
    matrix: CMatrix<f64>,
    noise: NoiseModel<f64>,
}

/// Every parameter of one sweep point, with the coupling network precomputed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: ArrayGeometry<f64>,
    pub sector: AngularSector<f64>,
    pub num_users: usize,
    pub num_paths: usize,
    pub large_scale_gain: f64,
    pub normalization: ColumnNormalization,
    pub constellation: ConstellationSpec<f64>,
    pub bits: u32,
    pub lmmse_bits: u32,
    pub steering_deg: f64,
    pub snr_db: f64,
    pub step_scale: f64,
    pub one_bit_steps: OneBitSteps,
    pub lmmse_quant_noise: LmmseQuantNoise,
    pub zeta: f64,
    pub options: DetectorOptions<f64>,
    coupling: Option<CouplingSetup>,
}

impl Scenario {
    /// Resolves the configuration at `value` of its sweep variable.
    pub fn at(config: &ExperimentConfig, value: f64) -> Result<Self> {
        let mut c = config.clone();
        match config.sweep {
            SweepVariable::SnrDb => c.snr_db = vec![value],
            SweepVariable::Bits => c.bits = value as u32,
            SweepVariable::SpacingOverWavelength => c.spacing_over_wavelength = value,
            SweepVariable::SteeringDeg => c.steering_deg = Some(value),
            SweepVariable::SectorSpreadDeg => c.sector_spread_deg = value,
            SweepVariable::SectorCenterDeg => c.sector_center_deg = value,
            SweepVariable::NumAntennas => c.num_antennas = value as usize,
            SweepVariable::NumUsers => c.num_users = value as usize,
            SweepVariable::Iteration => {}
        }
        Self::from_resolved(&c)
    }

    /// Uses the first grid value.
    pub fn first(config: &ExperimentConfig) -> Result<Self> {
        let v = *config
            .grid()
            .first()
            .ok_or_else(|| Error::Config("empty sweep grid".into()))?;
        Self::at(config, v)
    }

    fn from_resolved(c: &ExperimentConfig) -> Result<Self> {
        let geometry = ArrayGeometry::new(c.num_antennas, c.spacing_over_wavelength)?;
        let coupling = if c.coupling {
            let params = MutualCouplingParams::from_circuit(
                c.lna_impedance_ohm,
                c.temperature_k,
                c.bandwidth_hz,
                Complex::new(0.0, 0.0),
            );
            let z = impedance_matrix(&geometry)?;
            let t = coupling_matrix(&z, &params)?;
            let noise = noise_covariance(&t, &z, &params)?;
            Some(CouplingSetup { matrix: t, noise })
        } else {
            None
        };
        let lmmse_bits = c.lmmse_bits.unwrap_or(c.bits);
        // Keep the one-bit step rules from silently ignoring a b>1 setting.
        for b in [c.bits, lmmse_bits] {
            make_quantizer(b, 1.0)?;
        }
        Ok(Self {
            geometry,
            sector: AngularSector::new(c.sector_center_deg, c.sector_spread_deg)?,
            num_users: c.num_users,
            num_paths: c.num_paths,
            large_scale_gain: c.large_scale_gain,
            normalization: c.normalization,
            constellation: ConstellationSpec::standard(c.constellation),
            bits: c.bits,
            lmmse_bits,
            steering_deg: c.steering_deg.unwrap_or(c.sector_center_deg),
            snr_db: c.snr_db[0],
            step_scale: c.step_scale,
            one_bit_steps: c.one_bit_steps,
            lmmse_quant_noise: c.lmmse_quant_noise,
            zeta: c.zeta,
            options: DetectorOptions {
                max_iters: c.max_iters,
                tol: c.tol,
                alpha: c.gamma_alpha,
                beta: c.gamma_beta,
                tail_divisor: c.tail_divisor,
            },
            coupling,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas
    }

    /// Inter-antenna Σ∆ phase `2π (d/λ) sin θ` of the steering angle.
    pub fn phase(&self) -> f64 {
        self.geometry.spatial_frequency(self.steering_deg)
    }

    pub fn noise_model(&self) -> NoiseModel<f64> {
        noise_for_snr(
            self.snr_db,
            self.num_users,
            self.num_antennas(),
            self.coupling.as_ref().map(|c| &c.noise),
        )
    }

    pub fn coupling_matrix(&self) -> Option<&CMatrix<f64>> {
        self.coupling.as_ref().map(|c| &c.matrix)
    }

    /// One channel realization with every user at the common large-scale gain.
    pub fn draw_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization<f64>> {
        generate_channel(
            &self.geometry,
            &self.sector,
            self.num_users,
            self.num_paths,
            &vec![self.large_scale_gain; self.num_users],
            self.coupling_matrix(),
            self.normalization,
            rng,
        )
    }

    /// Quantizers for a `bits`-deep array fed with per-antenna power `p_s`.
    pub fn stages(&self, bits: u32, p_s: f64) -> Result<Stages> {
        if bits == 1 && self.one_bit_steps == OneBitSteps::BussgangAdaptive {
            return Ok(Stages::Schedule(bussgang_one_bit_schedule(self.num_antennas(), p_s)?));
        }
        Ok(Stages::Fixed(make_quantizer(
            bits,
            calibrated_step(bits, p_s, self.step_scale)?,
        )?))
    }

    /// `Σ_q` diagonal for the linear receiver.
    pub fn lmmse_quant_noise(
        &self,
        h: &CMatrix<f64>,
        noise: &NoiseModel<f64>,
        p_s: f64,
        stages: &Stages,
    ) -> Result<Vec<f64>> {
        let n = self.num_antennas();
        let one_bit = match self.lmmse_quant_noise {
            LmmseQuantNoise::Auto => self.lmmse_bits == 1,
            LmmseQuantNoise::OneBitRecursion => true,
            LmmseQuantNoise::UniformStep => false,
        };
        if !one_bit {
            return Ok(quant_noise_uniform(n, stages.first_step()));
        }
        if noise.is_colored() {
            let sigma_s = self.constellation.variance();
            let p_x: Vec<f64> = (0..n)
                .map(|i| {
                    let row = h.row(i);
                    sigma_s * row.iter().map(|v| v.norm_sqr()).sum::<f64>() + noise.covariance[(i, i)].re
                })
                .collect();
            quant_noise_cov_mc(&p_x, self.zeta)
        } else {
            quant_noise_profile_1bit(n, p_s)
        }
    }
}

/// Per-detector error tallies; combine with [`TrialCounts::merge`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrialCounts {
    pub errors: Vec<u64>,
    pub symbols: Vec<u64>,
    pub failures: Vec<u64>,
    pub overloads: u64,
}

impl TrialCounts {
    pub fn zeros(detectors: usize) -> Self {
        Self {
            errors: vec![0; detectors],
            symbols: vec![0; detectors],
            failures: vec![0; detectors],
            overloads: 0,
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        for (a, b) in self.symbols.iter_mut().zip(&other.symbols) {
            *a += b;
        }
        for (a, b) in self.failures.iter_mut().zip(&other.failures) {
            *a += b;
        }
        self.overloads += other.overloads;
        self
    }
}

/// Channel, noise and receivers shared by all symbol vectors of a trial.
struct TrialSetup {
    h: CMatrix<f64>,
    noise: NoiseModel<f64>,
    phase: f64,
    sd_stages: Stages,
    lmmse_stages: Stages,
    lmmse: Option<std::result::Result<LmmseDetector<f64>, String>>,
    lmmse_unquantized: Option<std::result::Result<LmmseDetector<f64>, String>>,
}

fn setup_trial<R: Rng + ?Sized>(scenario: &Scenario, detectors: &[DetectorKind], rng: &mut R) -> Result<TrialSetup> {
    let channel = scenario.draw_channel(rng)?;
    let h = channel.matrix;
    let noise = scenario.noise_model();
    let n = scenario.num_antennas() as f64;
    let p_s = h.norm().powi(2) * scenario.constellation.variance() / n + noise.n0;
    let sd_stages = scenario.stages(scenario.bits, p_s)?;
    let lmmse_stages = if scenario.lmmse_bits == scenario.bits {
        sd_stages.clone()
    } else {
        scenario.stages(scenario.lmmse_bits, p_s)?
    };
    let phase = scenario.phase();
    let c = &scenario.constellation;
    let lmmse = if detectors.contains(&DetectorKind::Lmmse) {
        let sq = scenario.lmmse_quant_noise(&h, &noise, p_s, &lmmse_stages)?;
        let model = LinearizedModel::new(phase, sq);
        Some(LmmseDetector::new(&h, &noise.covariance, Some(&model), c).map_err(|e| e.to_string()))
    } else {
        None
    };
    let lmmse_unquantized = detectors.contains(&DetectorKind::LmmseUnquantized).then(|| {
        if noise.is_colored() {
            LmmseDetector::new(&h, &noise.covariance, None, c)
        } else {
            LmmseDetector::white_unquantized(&h, noise.n0, c)
        }
        .map_err(|e| e.to_string())
    });
    Ok(TrialSetup {
        h,
        noise,
        phase,
        sd_stages,
        lmmse_stages,
        lmmse,
        lmmse_unquantized,
    })
}

/// One transmitted vector: symbol indices and the noisy array input.
fn draw_vector<R: Rng + ?Sized>(
    scenario: &Scenario,
    setup: &TrialSetup,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Complex<f64>>)> {
    let c = &scenario.constellation;
    let truth: Vec<usize> = (0..scenario.num_users).map(|_| c.sample_index(rng)).collect();
    let s: Vec<_> = truth.iter().map(|&i| c.points[i]).collect();
    let n = setup.noise.sample(rng);
    let x = setup.h.mul_vec(&s)?.into_iter().zip(n).map(|(a, b)| a + b).collect();
    Ok((truth, x))
}

fn report(detector: DetectorKind, err: &str) {
    eprintln!("warning: {detector} failed on a symbol vector: {err}");
}

/// Draws one channel and runs `symbols_per_trial` vectors through every
/// detector. Detector failures are logged and counted as `K` symbol errors.
pub fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    detectors: &[DetectorKind],
    symbols_per_trial: usize,
    rng: &mut R,
) -> Result<TrialCounts> {
    let setup = setup_trial(scenario, detectors, rng)?;
    let k = scenario.num_users as u64;
    let need_first = detectors.iter().any(|d| matches!(d, DetectorKind::Sdvb1));
    let need_second = detectors.contains(&DetectorKind::Sdvb2);
    let need_lmmse = detectors.contains(&DetectorKind::Lmmse);
    let mut counts = TrialCounts::zeros(detectors.len());
    for _ in 0..symbols_per_trial {
        let (truth, x) = draw_vector(scenario, &setup, rng)?;
        let first = need_first.then(|| sd_forward(&x, setup.phase, &setup.sd_stages, SdOrder::First));
        let second = need_second.then(|| sd_forward(&x, setup.phase, &setup.sd_stages, SdOrder::Second));
        let lmmse_cap = if need_lmmse {
            if scenario.lmmse_bits == scenario.bits && first.is_some() {
                first.clone()
            } else {
                Some(sd_forward(&x, setup.phase, &setup.lmmse_stages, SdOrder::First))
            }
        } else {
            None
        };
        for cap in [&first, &second].into_iter().flatten() {
            counts.overloads += cap.overloads as u64;
        }
        for (d_idx, &det) in detectors.iter().enumerate() {
            let outcome: std::result::Result<Vec<usize>, String> = match det {
                DetectorKind::Lmmse => match (&setup.lmmse, &lmmse_cap) {
                    (Some(Ok(l)), Some(cap)) => l
                        .detect(&cap.observations)
                        .map(|r| r.symbol_indices)
                        .map_err(|e| e.to_string()),
                    (Some(Err(e)), _) => Err(e.clone()),
                    _ => unreachable!("linear receiver prepared when requested"),
                },
                DetectorKind::LmmseUnquantized => match &setup.lmmse_unquantized {
                    Some(Ok(l)) => l.detect(&x).map(|r| r.symbol_indices).map_err(|e| e.to_string()),
                    Some(Err(e)) => Err(e.clone()),
                    None => unreachable!("linear receiver prepared when requested"),
                },
                DetectorKind::Sdvb1 | DetectorKind::Sdvb2 => {
                    let cap = if det == DetectorKind::Sdvb1 { &first } else { &second };
                    let cap = cap.as_ref().expect("capture prepared when requested");
                    SdVbSolver::new(cap, &setup.h, &scenario.constellation, scenario.options)
                        .and_then(|s| s.run())
                        .map(|r| r.symbol_indices)
                        .map_err(|e| e.to_string())
                }
            };
            counts.symbols[d_idx] += k;
            match outcome {
                Ok(idx) => {
                    counts.errors[d_idx] += idx.iter().zip(&truth).filter(|(a, b)| a != b).count() as u64;
                }
                Err(e) => {
                    report(det, &e);
                    counts.errors[d_idx] += k;
                    counts.failures[d_idx] += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Per-iteration error tallies for the iterative detectors: entry
/// `[d][t]` counts errors when deciding after iteration `t + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConvergenceCounts {
    pub errors: Vec<Vec<u64>>,
    pub symbols: u64,
}

impl ConvergenceCounts {
    pub fn zeros(detectors: usize, iters: usize) -> Self {
        Self {
            errors: vec![vec![0; iters]; detectors],
            symbols: 0,
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.symbols += other.symbols;
        self
    }
}

/// Runs the iterative detectors for exactly `max_iters` sweeps, deciding
/// after each one. Non-iterative detectors are skipped.
pub fn run_convergence_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    detectors: &[DetectorKind],
    symbols_per_trial: usize,
    rng: &mut R,
) -> Result<ConvergenceCounts> {
    let setup = setup_trial(scenario, &[], rng)?;
    let iters = scenario.options.max_iters;
    let mut counts = ConvergenceCounts::zeros(detectors.len(), iters);
    for _ in 0..symbols_per_trial {
        let (truth, x) = draw_vector(scenario, &setup, rng)?;
        counts.symbols += scenario.num_users as u64;
        for (d_idx, &det) in detectors.iter().enumerate() {
            let order = match det {
                DetectorKind::Sdvb1 => SdOrder::First,
                DetectorKind::Sdvb2 => SdOrder::Second,
                _ => continue,
            };
            let cap: SigmaDeltaCapture<f64> = sd_forward(&x, setup.phase, &setup.sd_stages, order);
            let mut solver = SdVbSolver::new(&cap, &setup.h, &scenario.constellation, scenario.options)?;
            for t in 0..iters {
                solver.iterate()?;
                let idx = solver.decide()?;
                counts.errors[d_idx][t] += idx.iter().zip(&truth).filter(|(a, b)| a != b).count() as u64;
            }
        }
    }
    Ok(counts)
}

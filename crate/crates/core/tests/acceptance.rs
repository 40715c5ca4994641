//! Desk-scale acceptance criteria. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr so the verdicts show up even when the test
//! harness captures output.
//!
//! All Monte Carlo scenarios at three bits share one quantizer step scale,
//! [`STEP_SCALE`]; the library default overloads the second-order loop at
//! this operating point.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdmimo::detectors::{DetectorOptions, LmmseDetector, SdVbSolver};
use sdmimo::frontend::{calibrated_step, make_quantizer, sd_forward, LinearizedModel, SdOrder};
use sdmimo::harness::{
    run_convergence, run_experiment_with, DetectorKind, Execution, ExperimentConfig, SerCurve, SerPoint,
};
use sdmimo::moments::{logistic_cdf, truncated_component};
use sdmimo::validation::{run_oracle, ValidationSettings};
use sdmimo::{Constellation, Matrix, Modulation, C64};

/// Step scale for every three-bit scenario below.
const STEP_SCALE: f64 = 24.0;

/// Serializes the tests so the timing criterion does not share the CPU.
fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: {verdict}  {detail}");
}

fn config(overrides: &[&str]) -> ExperimentConfig {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_overrides(&ov).unwrap()
}

/// N=64, K=8, 40° sector centred at 20°, 12 dB, plus `extra`.
fn desk(extra: &[&str]) -> ExperimentConfig {
    let step = format!("step_scale={STEP_SCALE}");
    let mut ov = vec![
        "num_antennas=64",
        "num_users=8",
        "sector_center_deg=20.0",
        "sector_spread_deg=40.0",
        "snr_db=[12.0]",
        step.as_str(),
    ];
    ov.extend_from_slice(extra);
    config(&ov)
}

/// `a` below `b` with disjoint 95% intervals.
fn below(a: &SerPoint, b: &SerPoint) -> bool {
    a.ci_high < b.ci_low
}

fn fmt_point(p: &SerPoint) -> String {
    format!(
        "{}={:.2e} [{:.2e}, {:.2e}]",
        p.detector.name(),
        p.ser,
        p.ci_low,
        p.ci_high
    )
}

fn oracle_criterion(n: u32, names: &[&str], budget: Option<Duration>) {
    let _guard = exclusive();
    let settings = ValidationSettings::default();
    let mut passed = true;
    let mut details = Vec::new();
    for name in names {
        let r = run_oracle(name, &settings).unwrap();
        let in_time = budget.is_none_or(|b| r.elapsed < b);
        passed &= r.passed && in_time;
        details.push(format!("{}: {} ({:.2}s)", r.name, r.detail, r.elapsed.as_secs_f64()));
    }
    report(n, passed, &details.join("; "));
    assert!(passed, "{}", details.join("; "));
}

#[test]
fn criterion_01_linearization_identity() {
    oracle_criterion(1, &["appendix-a"], Some(Duration::from_secs(5)));
}

/// Mean and variance of `x = μ + z/√(2γ)` where `z` follows the logistic law
/// `F(z) = 1/(1 + e^{−3z/√π})` truncated to the bin, by inverse-CDF sampling.
struct McMoments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

fn logistic_truncated_mc(mu: f64, gamma: f64, a: f64, b: f64, n: usize, rng: &mut ChaCha8Rng) -> McMoments {
    let s = (2.0 * gamma).sqrt();
    let k = 3.0 / std::f64::consts::PI.sqrt();
    let (fa, fb) = (logistic_cdf(s * (a - mu)), logistic_cdf(s * (b - mu)));
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let p = fa + (fb - fa) * rng.random::<f64>();
            mu + (p / (1.0 - p)).ln() / k / s
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(m2, m4), x| {
        let d2 = (x - mean) * (x - mean);
        (m2 + d2, m4 + d2 * d2)
    });
    let var = m2 / n as f64;
    let m4 = m4 / n as f64;
    McMoments {
        mean,
        var,
        se_mean: (var / n as f64).sqrt(),
        se_var: ((m4 - var * var) / n as f64).sqrt(),
    }
}

#[test]
fn criterion_02_truncated_moments_against_logistic_monte_carlo() {
    let _guard = exclusive();
    let start = Instant::now();
    let mus = [-1.0, -0.3, 0.0, 0.5, 1.5];
    let gammas = [0.5, 2.0];
    let bins = [
        (0.0, f64::INFINITY),
        (f64::NEG_INFINITY, -0.5),
        (-0.5, 0.5),
        (0.25, 1.75),
        (1.0, 2.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = 0;
    let mut worst = (0.0f64, String::new());
    for &mu in &mus {
        for &gamma in &gammas {
            for &(a, b) in &bins {
                let mc = logistic_truncated_mc(mu, gamma, a, b, 1_000_000, &mut rng);
                let (mean, var) = truncated_component(mu, gamma, a, b);
                let z_mean = (mean - mc.mean).abs() / mc.se_mean;
                let z_var = (var - mc.var).abs() / mc.se_var;
                let z = z_mean.max(z_var);
                if z <= 3.0 {
                    agree += 1;
                }
                if z > worst.0 {
                    worst = (
                        z,
                        format!(
                            "μ={mu} γ={gamma} [{a}, {b}]: mean {mean:.4} vs {:.4}, var {var:.4} vs {:.4}",
                            mc.mean, mc.var
                        ),
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let cases = mus.len() * gammas.len() * bins.len();
    let passed = agree == cases && elapsed < Duration::from_secs(60);
    let detail = format!(
        "{agree}/{cases} cases within 3 SE in {:.1}s; worst {:.1} SE at {}",
        elapsed.as_secs_f64(),
        worst.0,
        worst.1
    );
    report(2, passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_03_discrete_posterior() {
    oracle_criterion(3, &["discrete-posterior"], None);
}

#[test]
fn criterion_04_incremental_residual() {
    oracle_criterion(4, &["incremental-residual"], None);
}

#[test]
fn criterion_05_one_bit_noise_profile() {
    oracle_criterion(5, &["one-bit-noise"], None);
}

#[test]
fn criterion_06_convergence_plateau() {
    let _guard = exclusive();
    let start = Instant::now();
    let c = desk(&[
        "bits=3",
        "trials=200",
        "symbols_per_trial=100",
        "max_iters=20",
        "detectors=[\"sdvb1\",\"sdvb2\"]",
    ]);
    let curve = run_convergence(&c, Execution::Parallel).unwrap();
    let elapsed = start.elapsed();
    let mut passed = elapsed < Duration::from_secs(600);
    let mut details = Vec::new();
    for d in [DetectorKind::Sdvb1, DetectorKind::Sdvb2] {
        let s = curve.series(d);
        let (prev, last) = (s[18].ser, s[19].ser);
        let change = if prev > 0.0 { (last - prev).abs() / prev } else { last };
        passed &= change < 0.05;
        details.push(format!(
            "{}: SER(1)={:.2e} SER(19)={prev:.3e} SER(20)={last:.3e} change {:.2}%",
            d.name(),
            s[0].ser,
            change * 100.0
        ));
    }
    let detail = format!("{} in {:.0}s", details.join(", "), elapsed.as_secs_f64());
    report(6, passed, &detail);
    assert!(passed, "{detail}");
}

/// d=λ/4 at three bits, 2·10⁵ symbols per detector; shared by 7 and 8.
fn quarter_wave_three_bit() -> &'static SerCurve {
    static CURVE: OnceLock<SerCurve> = OnceLock::new();
    CURVE.get_or_init(|| {
        let c = desk(&[
            "spacing_over_wavelength=0.25",
            "bits=3",
            "trials=250",
            "symbols_per_trial=100",
            "detectors=[\"lmmse\",\"sdvb1\",\"sdvb2\"]",
        ]);
        run_experiment_with(&c, Execution::Parallel).unwrap()
    })
}

#[test]
fn criterion_07_detector_ordering() {
    let _guard = exclusive();
    let curve = quarter_wave_three_bit();
    let p = |d| curve.point(12.0, d).unwrap();
    let (l, v1, v2) = (p(DetectorKind::Lmmse), p(DetectorKind::Sdvb1), p(DetectorKind::Sdvb2));
    assert!(v2.symbols >= 200_000);
    let passed = below(v2, v1) && below(v1, l);
    let detail = format!("{}, {}, {}", fmt_point(v2), fmt_point(v1), fmt_point(l));
    report(7, passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_08_one_bit_reversal() {
    let _guard = exclusive();
    let c = desk(&[
        "spacing_over_wavelength=0.25",
        "bits=1",
        "trials=250",
        "symbols_per_trial=100",
        "detectors=[\"sdvb1\",\"sdvb2\"]",
    ]);
    let one = run_experiment_with(&c, Execution::Parallel).unwrap();
    let three = quarter_wave_three_bit();
    let (a1, a2) = (
        one.point(12.0, DetectorKind::Sdvb1).unwrap(),
        one.point(12.0, DetectorKind::Sdvb2).unwrap(),
    );
    let (b1, b2) = (
        three.point(12.0, DetectorKind::Sdvb1).unwrap(),
        three.point(12.0, DetectorKind::Sdvb2).unwrap(),
    );
    let passed = below(a1, a2) && below(b2, b1);
    let detail = format!(
        "1-bit {} vs {}; 3-bit {} vs {}",
        fmt_point(a1),
        fmt_point(a2),
        fmt_point(b1),
        fmt_point(b2)
    );
    report(8, passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_09_steering_at_sector_centre() {
    let _guard = exclusive();
    let grid: Vec<f64> = (0..9).map(|i| 5.0 * i as f64).collect();
    let values = format!("sweep_values={grid:?}");
    let c = desk(&[
        "spacing_over_wavelength=0.25",
        "bits=3",
        "trials=100",
        "symbols_per_trial=100",
        "sweep=\"steering_deg\"",
        values.as_str(),
        "detectors=[\"sdvb1\",\"sdvb2\"]",
    ]);
    let curve = run_experiment_with(&c, Execution::Parallel).unwrap();
    let centre = 4;
    let mut passed = true;
    let mut details = Vec::new();
    for d in [DetectorKind::Sdvb1, DetectorKind::Sdvb2] {
        let s: Vec<f64> = curve.series(d).iter().map(|p| p.ser).collect();
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let near = s[centre - 1..=centre + 1].iter().copied().fold(f64::INFINITY, f64::min);
        passed &= near <= min;
        let argmin = s.iter().position(|&v| v == min).unwrap();
        details.push(format!("{}: minimum {min:.2e} at {}°", d.name(), grid[argmin]));
    }
    let detail = details.join(", ");
    report(9, passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_10_spacing_sweet_spot() {
    let _guard = exclusive();
    let spacings = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0];
    let values = format!("sweep_values={spacings:?}");
    let c = desk(&[
        "bits=3",
        "trials=50",
        "symbols_per_trial=100",
        "sweep=\"spacing_over_wavelength\"",
        values.as_str(),
        "detectors=[\"sdvb1\",\"sdvb2\"]",
    ]);
    let curve = run_experiment_with(&c, Execution::Parallel).unwrap();
    let mut passed = true;
    let mut details = Vec::new();
    for d in [DetectorKind::Sdvb1, DetectorKind::Sdvb2] {
        let s = curve.series(d);
        let (dense, half) = (s[0], s[5]);
        for mid in [s[3], s[4]] {
            passed &= below(mid, dense) && below(mid, half);
        }
        details.push(format!(
            "{}: {}",
            d.name(),
            s.iter()
                .zip(&spacings)
                .map(|(p, d)| format!("{d:.3}→{:.2e}", p.ser))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    let detail = details.join("; ");
    report(10, passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_11_mutual_coupling_structure() {
    oracle_criterion(11, &["coupling-structure", "dipole-impedance"], None);
}

fn gaussian_matrix(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let scale = (0.5 / n as f64).sqrt();
    Matrix::from_fn(n, k, |_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) * scale
    })
}

/// Least-squares fit `y = a + b x`; returns `(b, R²)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

fn min_time(repeats: usize, mut f: impl FnMut()) -> f64 {
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_12_complexity_scaling() {
    let _guard = exclusive();
    let k = 8;
    let sizes = [32usize, 64, 128, 256, 512];
    let constellation = Constellation::standard(Modulation::Qpsk);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut vb_times = Vec::new();
    let mut lmmse_times = Vec::new();
    for &n in &sizes {
        let h = gaussian_matrix(n, k, &mut rng);
        let s: Vec<C64> = (0..k)
            .map(|_| constellation.points[constellation.sample_index(&mut rng)])
            .collect();
        let x = h.mul_vec(&s).unwrap();
        let step = calibrated_step(3, k as f64 / n as f64, STEP_SCALE).unwrap();
        let quantizer = make_quantizer(3, step).unwrap();
        let capture = sd_forward(&x, 0.3, &quantizer, SdOrder::Second);
        let options = DetectorOptions {
            max_iters: 1000,
            tol: 0.0,
            ..DetectorOptions::default()
        };
        let sweeps = 20;
        let per_sweep = min_time(15, || {
            let mut solver = SdVbSolver::new(&capture, &h, &constellation, options).unwrap();
            for _ in 0..sweeps {
                solver.iterate().unwrap();
            }
        }) / sweeps as f64;
        vb_times.push(per_sweep);

        let noise = Matrix::identity(n).scale(0.05);
        let model = LinearizedModel::new(0.3, vec![step * step / 6.0; n]);
        lmmse_times.push(min_time(3, || {
            LmmseDetector::new(&h, &noise, Some(&model), &constellation).unwrap();
        }));
    }
    let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let (_, r2) = linear_fit(&ns, &vb_times);
    let logs = |v: &[f64]| v.iter().map(|t| t.ln()).collect::<Vec<_>>();
    let (vb_exp, _) = linear_fit(&logs(&ns), &logs(&vb_times));
    let (lmmse_exp, _) = linear_fit(&logs(&ns), &logs(&lmmse_times));
    let passed = r2 > 0.95 && lmmse_exp > 2.0;
    let detail = format!(
        "SD-VB sweep linear fit R²={r2:.4} (log-log slope {vb_exp:.2}, {:.1}µs at N=512); LMMSE build log-log slope {lmmse_exp:.2} ({:.1}ms at N=512)",
        vb_times[4] * 1e6,
        lmmse_times[4] * 1e3
    );
    report(12, passed, &detail);
    assert!(passed, "{detail}");
}

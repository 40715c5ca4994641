//! Few-bit uniform quantizers, spatial Σ∆ front-ends of order 1 and 2, and
//! the linear model `y = x + U⁻¹ q` that the LMMSE receiver relies on.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cis, Scalar};

pub const MAX_BITS: u32 = 12;

/// Mid-rise uniform quantizer with `2^b` levels spaced `Λ` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec<T> {
    pub bits: u32,
    pub step: T,
    pub thresholds: Vec<T>,
    pub levels: Vec<T>,
}

/// Thresholds `d_m = (−2^{b−1} + m) Λ`, `m = 1..2^b−1`, and bin midpoints as levels.
pub fn make_quantizer<T: Scalar>(bits: u32, step: T) -> Result<QuantizerSpec<T>> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::Domain(format!(
            "bit depth must be in 1..={MAX_BITS}, got {bits}"
        )));
    }
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::Domain(format!("quantizer step must be positive, got {step}")));
    }
    let half = 1i64 << (bits - 1);
    let m_count = 1i64 << bits;
    let thresholds = (1..m_count).map(|m| T::lit((m - half) as f64) * step).collect();
    let levels = (0..m_count).map(|m| T::lit((m - half) as f64 + 0.5) * step).collect();
    Ok(QuantizerSpec {
        bits,
        step,
        thresholds,
        levels,
    })
}

/// One real component after quantization: output level and the bin `[low, up)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealBin<T> {
    pub level: T,
    pub low: T,
    pub up: T,
}

/// A quantized complex sample with independent real/imaginary bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedSample<T> {
    pub value: Complex<T>,
    pub low: Complex<T>,
    pub up: Complex<T>,
}

impl<T: Scalar> QuantizerSpec<T> {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Inputs with `|x| <= full_scale` never saturate the quantizer beyond half a step.
    pub fn full_scale(&self) -> T {
        T::lit((1u64 << (self.bits - 1)) as f64) * self.step
    }

    /// A value sitting exactly on a threshold goes to the upper bin.
    pub fn quantize_real(&self, x: T) -> RealBin<T> {
        let m = self.thresholds.partition_point(|&t| t <= x);
        RealBin {
            level: self.levels[m],
            low: if m == 0 {
                T::neg_infinity()
            } else {
                self.thresholds[m - 1]
            },
            up: self.thresholds.get(m).copied().unwrap_or(T::infinity()),
        }
    }

    pub fn quantize_complex(&self, x: Complex<T>) -> QuantizedSample<T> {
        let re = self.quantize_real(x.re);
        let im = self.quantize_real(x.im);
        QuantizedSample {
            value: Complex::new(re.level, im.level),
            low: Complex::new(re.low, im.low),
            up: Complex::new(re.up, im.up),
        }
    }

    pub fn overloads(&self, x: Complex<T>) -> bool {
        let fs = self.full_scale();
        x.re.abs() > fs || x.im.abs() > fs
    }
}

/// Free-function form of [`QuantizerSpec::quantize_complex`].
pub fn quantize_complex<T: Scalar>(spec: &QuantizerSpec<T>, x: Complex<T>) -> QuantizedSample<T> {
    spec.quantize_complex(x)
}

/// Supplies the quantizer used at each Σ∆ stage (antenna), or `None` for an
/// ideal infinite-resolution converter.
pub trait StageQuantizer<T> {
    fn stage(&self, i: usize) -> Option<&QuantizerSpec<T>>;
}

impl<T> StageQuantizer<T> for QuantizerSpec<T> {
    fn stage(&self, _: usize) -> Option<&QuantizerSpec<T>> {
        Some(self)
    }
}

/// Per-antenna schedule; must have one entry per stage.
impl<T> StageQuantizer<T> for [QuantizerSpec<T>] {
    fn stage(&self, i: usize) -> Option<&QuantizerSpec<T>> {
        Some(&self[i])
    }
}

impl<T> StageQuantizer<T> for Vec<QuantizerSpec<T>> {
    fn stage(&self, i: usize) -> Option<&QuantizerSpec<T>> {
        Some(&self[i])
    }
}

/// Infinite resolution: `y = r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unquantized;

impl<T> StageQuantizer<T> for Unquantized {
    fn stage(&self, _: usize) -> Option<&QuantizerSpec<T>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SdOrder {
    First,
    Second,
}

impl SdOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            SdOrder::First => 1,
            SdOrder::Second => 2,
        }
    }
}

impl TryFrom<u8> for SdOrder {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(SdOrder::First),
            2 => Ok(SdOrder::Second),
            _ => Err(Error::Domain(format!("sigma-delta order must be 1 or 2, got {v}"))),
        }
    }
}

impl From<SdOrder> for u8 {
    fn from(o: SdOrder) -> u8 {
        o.as_u8()
    }
}

/// Output of a spatial Σ∆ array.
#[derive(Debug, Clone)]
pub struct SigmaDeltaCapture<T> {
    /// Quantized outputs `y`.
    pub observations: Vec<Complex<T>>,
    /// Lower/upper bin edges of each `y_i`, per real component.
    pub bin_low: Vec<Complex<T>>,
    pub bin_up: Vec<Complex<T>>,
    /// Quantizer inputs `r`.
    pub pre_quantized: Vec<Complex<T>>,
    pub order: SdOrder,
    pub phase: T,
    /// Stages whose input exceeded the quantizer full-scale range.
    pub overloads: usize,
}

impl<T: Scalar> SigmaDeltaCapture<T> {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// `q = y − r`.
    pub fn quantization_error(&self) -> Vec<Complex<T>> {
        self.observations
            .iter()
            .zip(&self.pre_quantized)
            .map(|(y, r)| y - r)
            .collect()
    }

    /// True when every `r_i` lies in its recorded bin.
    pub fn bins_bracket_inputs(&self) -> bool {
        self.pre_quantized
            .iter()
            .zip(self.bin_low.iter().zip(&self.bin_up))
            .all(|(r, (lo, up))| lo.re <= r.re && r.re <= up.re && lo.im <= r.im && r.im <= up.im)
    }
}

/// Runs the spatial Σ∆ recursion of the given order over `x`.
pub fn sd_forward<T: Scalar, Q: StageQuantizer<T> + ?Sized>(
    x: &[Complex<T>],
    phase: T,
    quantizer: &Q,
    order: SdOrder,
) -> SigmaDeltaCapture<T> {
    let n = x.len();
    let c1 = cis(-phase);
    let c2 = cis(-phase * T::lit(2.0));
    let two = T::lit(2.0);
    let mut capture = SigmaDeltaCapture {
        observations: Vec::with_capacity(n),
        bin_low: Vec::with_capacity(n),
        bin_up: Vec::with_capacity(n),
        pre_quantized: Vec::with_capacity(n),
        order,
        phase,
        overloads: 0,
    };
    // e_i = r_i − y_i for the previous two stages.
    let mut e1 = Complex::zero();
    let mut e2 = Complex::zero();
    for (i, &xi) in x.iter().enumerate() {
        let r = match order {
            SdOrder::First => xi + c1 * e1,
            SdOrder::Second => xi + c1 * e1 * two - c2 * e2,
        };
        let (y, lo, up) = match quantizer.stage(i) {
            Some(q) => {
                if q.overloads(r) {
                    capture.overloads += 1;
                }
                let s = q.quantize_complex(r);
                (s.value, s.low, s.up)
            }
            None => (r, r, r),
        };
        e2 = e1;
        e1 = r - y;
        capture.observations.push(y);
        capture.bin_low.push(lo);
        capture.bin_up.push(up);
        capture.pre_quantized.push(r);
    }
    capture
}

/// `r_i = x_i + e^{−jφ}(r_{i−1} − y_{i−1})`, `y_i = Q(r_i)`.
pub fn sd1_forward<T: Scalar, Q: StageQuantizer<T> + ?Sized>(
    x: &[Complex<T>],
    phase: T,
    quantizer: &Q,
) -> SigmaDeltaCapture<T> {
    sd_forward(x, phase, quantizer, SdOrder::First)
}

/// `r_i = x_i + 2e^{−jφ}(r_{i−1} − y_{i−1}) − e^{−j2φ}(r_{i−2} − y_{i−2})`.
pub fn sd2_forward<T: Scalar, Q: StageQuantizer<T> + ?Sized>(
    x: &[Complex<T>],
    phase: T,
    quantizer: &Q,
) -> SigmaDeltaCapture<T> {
    sd_forward(x, phase, quantizer, SdOrder::Second)
}

/// Lower-triangular Toeplitz `U` with `[U]_{ij} = e^{−j(i−j)φ}`.
pub fn build_u_matrix<T: Scalar>(n: usize, phase: T) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            cis(-phase * T::lit((i - j) as f64))
        } else {
            Complex::zero()
        }
    })
}

/// `U⁻¹`: unit diagonal, subdiagonal `−e^{−jφ}`.
pub fn build_u_inverse<T: Scalar>(n: usize, phase: T) -> CMatrix<T> {
    let c = cis(-phase);
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex::one()
        } else if i == j + 1 {
            -c
        } else {
            Complex::zero()
        }
    })
}

/// `U⁻¹ v` in O(N).
pub fn apply_u_inverse<T: Scalar>(v: &[Complex<T>], phase: T) -> Vec<Complex<T>> {
    let c = cis(-phase);
    (0..v.len())
        .map(|i| if i == 0 { v[0] } else { v[i] - c * v[i - 1] })
        .collect()
}

/// Linear model of a first-order array.
#[derive(Debug, Clone)]
pub struct LinearizedModel<T> {
    pub u_matrix: CMatrix<T>,
    /// Diagonal of `Σ_q`.
    pub quant_noise_cov: Vec<T>,
}

impl<T: Scalar> LinearizedModel<T> {
    pub fn new(phase: T, quant_noise_cov: Vec<T>) -> Self {
        Self {
            u_matrix: build_u_matrix(quant_noise_cov.len(), phase),
            quant_noise_cov,
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.quant_noise_cov.len()
    }

    /// Phase recovered from the first subdiagonal of `U`.
    pub fn phase(&self) -> T {
        if self.u_matrix.nrows() < 2 {
            return T::zero();
        }
        -self.u_matrix[(1, 0)].arg()
    }

    /// `U⁻¹ Σ_q U⁻ᴴ`, tridiagonal, in O(N).
    pub fn effective_noise_cov(&self) -> CMatrix<T> {
        let n = self.num_antennas();
        let c = cis(-self.phase());
        let s = &self.quant_noise_cov;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            let prev = if i > 0 { s[i - 1] } else { T::zero() };
            m[(i, i)] = Complex::new(s[i] + prev, T::zero());
            if i > 0 {
                m[(i, i - 1)] = -c * s[i - 1];
                m[(i - 1, i)] = -c.conj() * s[i - 1];
            }
        }
        m
    }
}

/// `max |y − x − U⁻¹(y − r)|` for a first-order capture (for second order
/// `U⁻¹` is applied twice).
pub fn linearization_check<T: Scalar>(x: &[Complex<T>], capture: &SigmaDeltaCapture<T>) -> T {
    let q = capture.quantization_error();
    let mut shaped = apply_u_inverse(&q, capture.phase);
    if capture.order == SdOrder::Second {
        shaped = apply_u_inverse(&shaped, capture.phase);
    }
    capture
        .observations
        .iter()
        .zip(x)
        .zip(&shaped)
        .map(|((y, xi), s)| (y - xi - s).norm())
        .fold(T::zero(), T::max)
}

fn bussgang_excess<T: Scalar>() -> T {
    T::FRAC_PI_2() - T::one()
}

/// Variance of the 1-bit quantization error at antenna `i ≥ 1` of a
/// first-order array with unit Bussgang gain: `(π/2−1)(1−(π/2−1)^i)/(2−π/2) · p_s`.
pub fn quant_noise_variance_1bit<T: Scalar>(i: usize, p_s: T) -> Result<T> {
    if i == 0 {
        return Err(Error::Domain("antenna index is 1-based".into()));
    }
    if !(p_s > T::zero()) {
        return Err(Error::Domain(format!("signal power must be positive, got {p_s}")));
    }
    let c = bussgang_excess::<T>();
    Ok(c * (T::one() - c.powi(i as i32)) / (T::one() - c) * p_s)
}

/// All `N` one-bit variances.
pub fn quant_noise_profile_1bit<T: Scalar>(n: usize, p_s: T) -> Result<Vec<T>> {
    (1..=n).map(|i| quant_noise_variance_1bit(i, p_s)).collect()
}

/// `p_q = (πζ/2 − 1) Π p_x` with `Π_{ij} = (πζ/2 − 1)^{i−j}` for `i ≥ j`.
pub fn quant_noise_cov_mc<T: Scalar>(p_x: &[T], zeta: T) -> Result<Vec<T>> {
    if let Some(p) = p_x.iter().find(|p| !(**p > T::zero())) {
        return Err(Error::Domain(format!("per-antenna power must be positive, got {p}")));
    }
    let c = T::FRAC_PI_2() * zeta - T::one();
    // Running sum Σ_{j<=i} c^{i−j} p_j.
    let mut acc = T::zero();
    Ok(p_x
        .iter()
        .map(|&p| {
            acc = acc * c + p;
            c * acc
        })
        .collect())
}

/// Uniform-noise model for a `b ≥ 2` array: `Λ²/6` per complex sample.
pub fn quant_noise_uniform<T: Scalar>(n: usize, step: T) -> Vec<T> {
    vec![step * step / T::lit(6.0); n]
}

/// Default step for a fixed-step array fed with total power `p_s` per
/// antenna: `Λ/2 = √(π/2)·rms` at one bit, `Λ = scale·rms/2^{b−1}` above,
/// where `rms = √(p_s/2)` is the per-component level.
pub fn calibrated_step<T: Scalar>(bits: u32, p_s: T, scale: T) -> Result<T> {
    if !(p_s > T::zero()) {
        return Err(Error::Domain(format!("signal power must be positive, got {p_s}")));
    }
    let rms = (p_s / T::lit(2.0)).sqrt();
    Ok(if bits == 1 {
        T::lit(2.0) * T::FRAC_PI_2().sqrt() * rms
    } else {
        scale * rms / T::lit((1u64 << (bits - 1)) as f64)
    })
}

/// Per-antenna 1-bit steps that keep the Bussgang gain at one along a
/// first-order array: stage `i` sees `p_s + τ_{q_{i−1}}`.
pub fn bussgang_one_bit_schedule<T: Scalar>(n: usize, p_s: T) -> Result<Vec<QuantizerSpec<T>>> {
    let mut prev = T::zero();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let p_r = p_s + prev;
        out.push(make_quantizer(1, (T::PI() * p_r).sqrt())?);
        prev = quant_noise_variance_1bit(i, p_s)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn quantizer_tables() {
        let q = make_quantizer(1, 2.0).unwrap();
        assert_eq!(q.thresholds, vec![0.0]);
        assert_eq!(q.levels, vec![-1.0, 1.0]);

        let q = make_quantizer(2, 1.0).unwrap();
        assert_eq!(q.thresholds, vec![-1.0, 0.0, 1.0]);
        assert_eq!(q.levels, vec![-1.5, -0.5, 0.5, 1.5]);

        let q = make_quantizer(3, 0.5).unwrap();
        assert_eq!(q.thresholds.len(), 7);
        assert_eq!(q.levels.len(), 8);
        for (a, b) in q.levels.iter().zip(q.levels.iter().rev()) {
            assert_eq!(*a, -*b);
        }
        assert!(q.thresholds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn quantizer_rejects_bad_parameters() {
        assert!(make_quantizer(1, 0.0f64).is_err());
        assert!(make_quantizer(1, -1.0f64).is_err());
        assert!(make_quantizer(0, 1.0f64).is_err());
        assert!(make_quantizer(13, 1.0f64).is_err());
    }

    #[test]
    fn quantize_complex_examples() {
        let q = make_quantizer(1, 2.0).unwrap();
        let s = q.quantize_complex(c(0.7, -0.3));
        assert_eq!(s.value, c(1.0, -1.0));
        assert_eq!((s.low.re, s.up.re), (0.0, f64::INFINITY));
        assert_eq!((s.low.im, s.up.im), (f64::NEG_INFINITY, 0.0));

        let q = make_quantizer(2, 1.0).unwrap();
        let s = q.quantize_complex(c(0.3, 2.9));
        assert_eq!(s.value, c(0.5, 1.5));
        assert_eq!((s.low.re, s.up.re), (0.0, 1.0));
        assert_eq!((s.low.im, s.up.im), (1.0, f64::INFINITY));
    }

    #[test]
    fn threshold_ties_go_up() {
        let q = make_quantizer(2, 1.0).unwrap();
        assert_eq!(q.quantize_real(0.0).level, 0.5);
        assert_eq!(q.quantize_real(-1.0).level, -0.5);
        assert_eq!(q.quantize_real(1.0).level, 1.5);
    }

    #[test]
    fn unquantized_is_identity() {
        let x = vec![c(0.3, -1.2), c(2.0, 0.1), c(-0.7, 0.4)];
        for order in [SdOrder::First, SdOrder::Second] {
            let cap = sd_forward(&x, 0.8, &Unquantized, order);
            assert_eq!(cap.observations, x);
            assert_eq!(cap.pre_quantized, x);
        }
    }

    #[test]
    fn zero_input() {
        let q = make_quantizer(2, 1.0).unwrap();
        let x = vec![Complex::zero(); 4];
        let cap = sd1_forward(&x, 0.3, &q);
        assert_eq!(cap.pre_quantized[0], Complex::zero());
        assert_eq!(cap.observations[0], c(0.5, 0.5));
        let cap = sd2_forward(&x, 0.0, &Unquantized);
        assert!(cap.pre_quantized.iter().all(|r| r.is_zero()));
    }

    #[test]
    fn first_order_two_step_recursion() {
        let q = make_quantizer(1, 2.0).unwrap();
        let x = vec![c(0.3, 0.3), c(0.3, 0.3)];
        let cap = sd1_forward(&x, 0.0, &q);
        assert!((cap.pre_quantized[1] - c(-0.4, -0.4)).norm() < 1e-15);
        assert_eq!(cap.observations, vec![c(1.0, 1.0), c(-1.0, -1.0)]);
    }

    #[test]
    fn second_order_matches_direct_recursion() {
        let q = make_quantizer(2, 0.7).unwrap();
        let x = vec![c(0.2, -0.9), c(-0.4, 0.3), c(1.1, 0.5)];
        let phi: f64 = 0.6;
        let cap = sd2_forward(&x, phi, &q);
        let w = Complex::from_polar(1.0, -phi);
        let r1 = x[0];
        let y1 = q.quantize_complex(r1).value;
        let r2 = x[1] + 2.0 * w * (r1 - y1);
        let y2 = q.quantize_complex(r2).value;
        let r3 = x[2] + 2.0 * w * (r2 - y2) - w * w * (r1 - y1);
        let y3 = q.quantize_complex(r3).value;
        assert_eq!(cap.observations, vec![y1, y2, y3]);
        assert!((cap.pre_quantized[2] - r3).norm() < 1e-15);
    }

    #[test]
    fn u_matrix_examples() {
        let u = build_u_matrix(3, 0.0f64);
        let ui = build_u_inverse(3, 0.0f64);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(u[(i, j)].re, if i >= j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(ui.row(1), vec![c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(ui.row(2), vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);

        let u = build_u_matrix(2, std::f64::consts::FRAC_PI_2);
        assert!((u[(1, 0)] - c(0.0, -1.0)).norm() < 1e-15);

        let u = build_u_matrix(7, 1.3f64);
        let prod = u.mul(&build_u_inverse(7, 1.3)).unwrap();
        assert!(prod.max_abs_diff(&CMatrix::identity(7)) < 1e-12);
    }

    #[test]
    fn linear_model_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bits in [1, 3] {
            let q = make_quantizer(bits, 0.6).unwrap();
            let x: Vec<_> = (0..32).map(|_| f64::sample_complex_normal(&mut rng)).collect();
            let cap = sd1_forward(&x, 0.9, &q);
            assert!(linearization_check(&x, &cap) < 1e-10);
            let cap = sd2_forward(&x, 0.9, &q);
            assert!(linearization_check(&x, &cap) < 1e-10);
        }
        let x = vec![c(1.0, 2.0); 5];
        assert_eq!(linearization_check(&x, &sd1_forward(&x, 0.2, &Unquantized)), 0.0);
    }

    #[test]
    fn effective_noise_cov_matches_dense_product() {
        let model = LinearizedModel::new(0.7f64, vec![0.3, 0.5, 0.9, 1.1]);
        let ui = build_u_inverse(4, 0.7);
        let dense = ui
            .mul(&CMatrix::from_diagonal(
                &model.quant_noise_cov.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>(),
            ))
            .unwrap()
            .mul(&ui.adjoint())
            .unwrap();
        assert!(dense.max_abs_diff(&model.effective_noise_cov()) < 1e-14);
        assert!((model.phase() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn one_bit_noise_variance() {
        let c1 = std::f64::consts::FRAC_PI_2 - 1.0;
        assert!((quant_noise_variance_1bit(1, 1.0).unwrap() - c1).abs() < 1e-15);
        let limit = c1 / (2.0 - std::f64::consts::FRAC_PI_2);
        assert!((limit - 1.3299).abs() < 1e-4);
        let prof = quant_noise_profile_1bit(200, 1.0).unwrap();
        assert!(prof.windows(2).all(|w| w[0] <= w[1]));
        assert!(prof.iter().all(|&v| v <= limit + 1e-15));
        assert!((prof[199] - limit).abs() < 1e-12);
        assert!(quant_noise_variance_1bit(0, 1.0).is_err());
    }

    #[test]
    fn coupled_noise_cov() {
        let zeta = 1.13;
        let cc = std::f64::consts::FRAC_PI_2 * zeta - 1.0;
        assert_eq!(quant_noise_cov_mc(&[2.0], zeta).unwrap(), vec![cc * 2.0]);
        let z0 = 2.0 / std::f64::consts::PI;
        assert!(quant_noise_cov_mc(&[1.0, 3.0], z0)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-15));
        let v = quant_noise_cov_mc(&[1.0; 4], zeta).unwrap();
        let mut partial = 0.0;
        for (m, got) in v.iter().enumerate() {
            partial += cc.powi(m as i32);
            assert!((got - cc * partial).abs() < 1e-14);
        }
        assert!(quant_noise_cov_mc(&[1.0, 0.0], zeta).is_err());
    }

    #[test]
    fn step_rules() {
        let p_s = 2.0;
        let step = calibrated_step(1, p_s, 2.5).unwrap();
        assert!((step / 2.0 - (std::f64::consts::FRAC_PI_2).sqrt()).abs() < 1e-14);
        let step = calibrated_step(3, p_s, 2.5).unwrap();
        assert!((step - 2.5 / 4.0).abs() < 1e-14);

        let sched = bussgang_one_bit_schedule(4, 1.0).unwrap();
        assert!((sched[0].step - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!(sched.windows(2).all(|w| w[0].step < w[1].step));
    }

    #[test]
    fn overload_counter_counts_saturated_stages() {
        let q = make_quantizer(1, 1.0).unwrap();
        let x = vec![c(5.0, 0.0), c(0.0, 0.0)];
        assert_eq!(sd1_forward(&x, 0.0, &q).overloads, 2);
        assert_eq!(sd1_forward(&[c(0.1, 0.1)], 0.0, &q).overloads, 0);
    }

    #[test]
    fn order_round_trips_through_u8() {
        assert_eq!(SdOrder::try_from(2u8).unwrap(), SdOrder::Second);
        assert!(SdOrder::try_from(3u8).is_err());
    }
}

//! Moment kernels of the variational updates.
//!
//! Truncated moments use a logistic CDF/PDF pair in place of the Gaussian
//! one. The hybrid closed form is evaluated in a numerically stable
//! arrangement; whenever it leaves the admissible set (mean outside the
//! bin, variance outside `(0, 1/(2γ)]`) the result is projected back, see
//! [`truncated_component`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::scalar::{dot_conj, norm_sqr, Scalar};

/// Slope `3/√π` of the logistic surrogate.
fn slope<T: Scalar>() -> T {
    T::lit(3.0) / T::PI().sqrt()
}

/// `F(x) = 1/(1 + e^{−3x/√π})`; `F(−∞) = 0`, `F(∞) = 1`.
pub fn logistic_cdf<T: Scalar>(x: T) -> T {
    let t = slope::<T>() * x;
    if t >= T::zero() {
        (T::one() + (-t).exp()).recip()
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// `f(x) = (3/√π) F(x)(1 − F(x))`.
pub fn logistic_pdf<T: Scalar>(x: T) -> T {
    if x.is_infinite() {
        return T::zero();
    }
    slope::<T>() * logistic_cdf(x) * logistic_cdf(-x)
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Below this `1 − F(α)/F(β)` the bin is treated as a point mass.
const DEGENERATE_MASS: f64 = 1e-10;

/// Mean and variance of a truncated complex variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMoments<T> {
    pub mean: Complex<T>,
    /// Sum of the two component variances.
    pub variance: T,
}

/// Per-component moments of `N(μ, 1/(2γ))` truncated to `[a, b]` under the
/// logistic surrogate. Returns `(mean, variance)`.
///
/// The raw closed form is used whenever it is admissible. Otherwise the mean
/// is clamped just inside the bin, and a non-positive variance is replaced by
/// `min(width²/12, 1/(2γ))` (finite bins) or a vanishing fraction of
/// `1/(2γ)` (half-lines). Variances above `1/(2γ)` are capped there.
pub fn truncated_component<T: Scalar>(mu: T, gamma: T, a: T, b: T) -> (T, T) {
    let s = (T::lit(2.0) * gamma).sqrt();
    let sigma2 = (T::lit(2.0) * gamma).recip();
    if a == T::neg_infinity() && b == T::infinity() {
        return (mu, sigma2);
    }
    if a == b {
        return (a, T::zero());
    }
    let (m, w, degenerate) = standardized_terms(s * (a - mu), s * (b - mu));
    if degenerate {
        return (midpoint(a, b, mu), finite_bin_variance(a, b, sigma2));
    }
    project(mu - m / s, (T::one() - w - m * m) * sigma2, a, b, sigma2)
}

/// `m = (f(β) − f(α))/(F(β) − F(α))` and `w = (βf(β) − αf(α))/(F(β) − F(α))`.
fn standardized_terms<T: Scalar>(alpha: T, beta: T) -> (T, T, bool) {
    // Reflect so the bin sits in the lower half, where F is small and
    // representable to full relative precision.
    let reflect = alpha + beta > T::zero();
    let (al, be) = if reflect { (-beta, -alpha) } else { (alpha, beta) };
    let k = slope::<T>();
    // After reflection only `al` can be infinite.
    let log_rho = if al == T::neg_infinity() {
        T::neg_infinity()
    } else {
        softplus(-k * be) - softplus(-k * al)
    };
    let rho = log_rho.exp();
    let one_minus_rho = -log_rho.exp_m1();
    if !(one_minus_rho > T::lit(DEGENERATE_MASS)) {
        return (T::zero(), T::zero(), true);
    }
    // f(x)/F(β) = k (1 − F(x)) F(x)/F(β).
    let tail_b = logistic_cdf(-be);
    let (fa_term, afa_term) = if al == T::neg_infinity() {
        (T::zero(), T::zero())
    } else {
        let t = rho * logistic_cdf(-al);
        (t, al * t)
    };
    let m = k * (tail_b - fa_term) / one_minus_rho;
    let w = k * (be * tail_b - afa_term) / one_minus_rho;
    (if reflect { -m } else { m }, w, false)
}

fn midpoint<T: Scalar>(a: T, b: T, mu: T) -> T {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => (a + b) / T::lit(2.0),
        (true, false) => a.max(mu),
        (false, true) => b.min(mu),
        (false, false) => mu,
    }
}

fn finite_bin_variance<T: Scalar>(a: T, b: T, sigma2: T) -> T {
    let width = b - a;
    if width.is_finite() {
        (width * width / T::lit(12.0)).min(sigma2)
    } else {
        sigma2 * T::epsilon()
    }
}

fn project<T: Scalar>(mean: T, var: T, a: T, b: T, sigma2: T) -> (T, T) {
    let width = b - a;
    let margin = T::lit(1e-9)
        * if width.is_finite() {
            width.min(sigma2.sqrt())
        } else {
            sigma2.sqrt()
        };
    let lo = if a.is_finite() { a + margin } else { a };
    let hi = if b.is_finite() { b - margin } else { b };
    let mean = if mean.is_nan() {
        midpoint(a, b, mean)
    } else {
        mean.max(lo).min(hi)
    };
    let var = if var > T::zero() {
        var.min(sigma2)
    } else {
        finite_bin_variance(a, b, sigma2)
    };
    (mean, var)
}

/// Complex truncated moments; real and imaginary parts are independent.
pub fn truncated_moments<T: Scalar>(mu: Complex<T>, gamma: T, low: Complex<T>, up: Complex<T>) -> TruncatedMoments<T> {
    let (mr, vr) = truncated_component(mu.re, gamma, low.re, up.re);
    let (mi, vi) = truncated_component(mu.im, gamma, low.im, up.im);
    TruncatedMoments {
        mean: Complex::new(mr, mi),
        variance: vr + vi,
    }
}

/// One-bit fast path for a half-line bin on the side of `sign`:
/// `ζ = sign·√(2γ)μ`, mean `μ + sign·f(ζ)/(√(2γ)F(ζ))`.
pub fn truncated_half_line<T: Scalar>(mu: T, gamma: T, sign: T) -> (T, T) {
    let s = (T::lit(2.0) * gamma).sqrt();
    let sigma2 = (T::lit(2.0) * gamma).recip();
    let zeta = sign * s * mu;
    // f(ζ)/F(ζ) = k (1 − F(ζ)).
    let ratio = slope::<T>() * logistic_cdf(-zeta);
    let mean = mu + sign * ratio / s;
    let var = (T::one() - zeta * ratio - ratio * ratio) * sigma2;
    let (a, b) = if sign > T::zero() {
        (T::zero(), T::infinity())
    } else {
        (T::neg_infinity(), T::zero())
    };
    project(mean, var, a, b, sigma2)
}

/// Fast path applied to both components; the signs are those of the
/// quantized output `y`.
pub fn truncated_moments_one_bit<T: Scalar>(mu: Complex<T>, gamma: T, y: Complex<T>) -> TruncatedMoments<T> {
    let sgn = |v: T| if v >= T::zero() { T::one() } else { -T::one() };
    let (mr, vr) = truncated_half_line(mu.re, gamma, sgn(y.re));
    let (mi, vi) = truncated_half_line(mu.im, gamma, sgn(y.im));
    TruncatedMoments {
        mean: Complex::new(mr, mi),
        variance: vr + vi,
    }
}

/// Posterior of one symbol given `z ≈ h s + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPosterior<T> {
    pub mean: Complex<T>,
    pub variance: T,
    pub probs: Vec<T>,
}

/// Unnormalized log-probabilities `ln p_a − γ(|a|²‖h‖² − 2Re(a* hᴴz))`.
/// The dropped `γ‖z‖²` term is common to every symbol.
pub fn symbol_log_scores<T: Scalar>(
    h_dot_z: Complex<T>,
    h_norm2: T,
    gamma: T,
    constellation: &ConstellationSpec<T>,
) -> Vec<T> {
    let two = T::lit(2.0);
    constellation
        .points
        .iter()
        .zip(&constellation.priors)
        .map(|(a, &p)| {
            if p > T::zero() {
                p.ln() - gamma * (a.norm_sqr() * h_norm2 - two * (a.conj() * h_dot_z).re)
            } else {
                T::neg_infinity()
            }
        })
        .collect()
}

/// Normalizes log-scores after subtracting their maximum.
pub fn normalize_log_scores<T: Scalar>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Posterior from the sufficient statistics `hᴴz` and `‖h‖²`.
pub fn discrete_posterior_stats<T: Scalar>(
    h_dot_z: Complex<T>,
    h_norm2: T,
    gamma: T,
    constellation: &ConstellationSpec<T>,
) -> SymbolPosterior<T> {
    let probs = normalize_log_scores(&symbol_log_scores(h_dot_z, h_norm2, gamma, constellation));
    let mut mean = Complex::new(T::zero(), T::zero());
    let mut energy = T::zero();
    for (a, &p) in constellation.points.iter().zip(&probs) {
        mean += a * p;
        energy += a.norm_sqr() * p;
    }
    SymbolPosterior {
        mean,
        variance: (energy - mean.norm_sqr()).max(T::zero()),
        probs,
    }
}

/// `p(a) ∝ p_a exp(−γ‖z − h a‖²)`.
pub fn discrete_posterior<T: Scalar>(
    z: &[Complex<T>],
    h: &[Complex<T>],
    gamma: T,
    constellation: &ConstellationSpec<T>,
) -> Result<SymbolPosterior<T>> {
    if z.len() != h.len() {
        return Err(Error::Shape(format!("z has {} entries, h has {}", z.len(), h.len())));
    }
    if !(gamma >= T::zero()) {
        return Err(Error::Domain(format!("precision must be nonnegative, got {gamma}")));
    }
    Ok(discrete_posterior_stats(
        dot_conj(h, z),
        norm_sqr(h),
        gamma,
        constellation,
    ))
}

/// `q(γ) = Gamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior<T> {
    pub shape: T,
    pub rate: T,
}

impl<T: Scalar> GammaPosterior<T> {
    pub fn mean(&self) -> T {
        self.shape / self.rate
    }
}

fn gamma_posterior<T: Scalar>(n: usize, rate_terms: T, alpha: T, beta: T) -> Result<GammaPosterior<T>> {
    let shape = T::lit(n as f64) + alpha;
    let rate = beta + rate_terms;
    if !(rate > T::zero()) || !(shape > T::zero()) || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "precision update is degenerate (shape {shape}, rate {rate})"
        )));
    }
    Ok(GammaPosterior { shape, rate })
}

/// `⟨γ⟩ = (N+α)/(β + ‖u‖² + 2Σ τ_r − τ_{r_N} + Σ_k τ_{s_k}‖h_k‖²)`.
pub fn gamma_update_order1<T: Scalar>(
    u: &[Complex<T>],
    tau_r: &[T],
    trace_hsh: T,
    alpha: T,
    beta: T,
) -> Result<GammaPosterior<T>> {
    let n = u.len();
    if tau_r.len() != n || n == 0 {
        return Err(Error::Shape(format!("{n} residuals with {} variances", tau_r.len())));
    }
    let tr: T = tau_r.iter().copied().sum();
    gamma_posterior(
        n,
        norm_sqr(u) + T::lit(2.0) * tr - tau_r[n - 1] + trace_hsh,
        alpha,
        beta,
    )
}

/// `⟨γ⟩ = (N+α)/(β + ‖u‖² + 6Σ τ_r − 5τ_{r_N} − τ_{r_{N−1}} + Σ_k τ_{s_k}‖h_k‖²)`.
pub fn gamma_update_order2<T: Scalar>(
    u: &[Complex<T>],
    tau_r: &[T],
    trace_hsh: T,
    alpha: T,
    beta: T,
) -> Result<GammaPosterior<T>> {
    let n = u.len();
    if tau_r.len() != n || n == 0 {
        return Err(Error::Shape(format!("{n} residuals with {} variances", tau_r.len())));
    }
    let tr: T = tau_r.iter().copied().sum();
    let prev = if n >= 2 { tau_r[n - 2] } else { T::zero() };
    gamma_posterior(
        n,
        norm_sqr(u) + T::lit(6.0) * tr - T::lit(5.0) * tau_r[n - 1] - prev + trace_hsh,
        alpha,
        beta,
    )
}

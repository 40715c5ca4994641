//! Cosine and sine integrals.
//!
//! `Ci(x) = γ + ln x + ∫₀ˣ (cos t − 1)/t dt` and `Si(x) = ∫₀ˣ sin t / t dt`.
//!
//! Power series below [`SERIES_LIMIT`]; above it both come from the
//! exponential integral `E₁(ix) = −Ci(x) + i(Si(x) − π/2)`, evaluated by a
//! modified-Lentz continued fraction. Neither branch suffers the cancellation
//! that the alternating series shows for large arguments.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SERIES_LIMIT: f64 = 4.0;
const MAX_TERMS: usize = 200;

/// Sine integral. Odd in `x`.
pub fn sine_integral<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        return -sine_integral(-x);
    }
    if x == T::zero() {
        return T::zero();
    }
    if x <= T::lit(SERIES_LIMIT) {
        series(x).1
    } else {
        continued_fraction(x).1
    }
}

/// Cosine integral, defined for `x > 0`.
pub fn cosine_integral<T: Scalar>(x: T) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("Ci(x) requires x > 0, got {x}")));
    }
    Ok(if x <= T::lit(SERIES_LIMIT) {
        series(x).0
    } else {
        continued_fraction(x).0
    })
}

/// `(Ci(x), Si(x))` from the Maclaurin series, `0 < x <= SERIES_LIMIT`.
fn series<T: Scalar>(x: T) -> (T, T) {
    let x2 = x * x;
    let eps = T::epsilon();

    // Si: term_k = (-1)^k x^(2k+1) / (2k+1)!, summed with weight 1/(2k+1).
    let mut term = x;
    let mut si = x;
    for k in 1..MAX_TERMS {
        let n = T::lit((2 * k) as f64);
        term = -term * x2 / (n * (n + T::one()));
        let contrib = term / (n + T::one());
        si += contrib;
        if contrib.abs() < eps * si.abs() {
            break;
        }
    }

    // Ci: term_k = (-1)^k x^(2k) / (2k)!, summed with weight 1/(2k).
    let mut term = T::one();
    let mut sum = T::zero();
    for k in 1..MAX_TERMS {
        let n = T::lit((2 * k) as f64);
        term = -term * x2 / ((n - T::one()) * n);
        let contrib = term / n;
        sum += contrib;
        if contrib.abs() < eps * sum.abs().max(T::min_positive_value()) {
            break;
        }
    }
    (T::EULER_GAMMA + x.ln() + sum, si)
}

/// `(Ci(x), Si(x))` via the continued fraction of `E₁(ix)`, `x > SERIES_LIMIT`.
fn continued_fraction<T: Scalar>(x: T) -> (T, T) {
    let tiny = T::min_positive_value().sqrt();
    let eps = T::epsilon();
    let one = Complex::<T>::one();

    let mut b = Complex::new(T::one(), x);
    let mut c = Complex::new(T::one() / tiny, T::zero());
    let mut d = one / b;
    let mut h = d;
    for i in 2..MAX_TERMS {
        let a = -T::lit(((i - 1) * (i - 1)) as f64);
        b += Complex::new(T::lit(2.0), T::zero());
        d = one / (d * a + b);
        c = b + one * a / c;
        if c.is_zero() {
            c = Complex::new(tiny, T::zero());
        }
        let del = c * d;
        h *= del;
        if (del - one).norm() < eps {
            break;
        }
    }
    let e1 = Complex::new(x.cos(), -x.sin()) * h;
    (-e1.re, T::FRAC_PI_2() + e1.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_of_zero_is_zero() {
        assert_eq!(sine_integral(0.0f64), 0.0);
    }

    #[test]
    fn ci_rejects_nonpositive_arguments() {
        assert!(cosine_integral(0.0f64).is_err());
        assert!(cosine_integral(-1.0f64).is_err());
        assert!(cosine_integral(f64::NAN).is_err());
    }

    #[test]
    fn reference_values() {
        // Reference values, 16 significant digits.
        let cases = [
            (1.0f64, 0.337_403_922_900_968_1, 0.946_083_070_367_183),
            (2.0, 0.422_980_828_774_864_9, 1.605_412_976_802_695),
            (10.0, -0.045_456_433_004_455_4, 1.658_347_594_218_874),
        ];
        for (x, ci, si) in cases {
            assert!((cosine_integral(x).unwrap() - ci).abs() < 1e-13, "Ci({x})");
            assert!((sine_integral(x) - si).abs() < 1e-13, "Si({x})");
        }
    }

    #[test]
    fn branches_agree_at_switchover() {
        let below = SERIES_LIMIT * (1.0 - 1e-12);
        let (ci_s, si_s) = series(below);
        let (ci_c, si_c) = continued_fraction(below);
        assert!((ci_s - ci_c).abs() < 1e-12);
        assert!((si_s - si_c).abs() < 1e-12);
    }

    #[test]
    fn large_argument_limits() {
        assert!((sine_integral(1e4f64) - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
        assert!(cosine_integral(1e4f64).unwrap().abs() < 1e-3);
    }

    #[test]
    fn f32_instantiation_is_close() {
        let v = cosine_integral(2.0f32 * std::f32::consts::PI).unwrap();
        assert!((v as f64 + 0.022_560_661_746_346_07).abs() < 1e-5);
    }
}

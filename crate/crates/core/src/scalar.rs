//! Floating-point scalar abstraction shared by every numerical kernel.
//!
//! The signal-processing core is written once against [`Scalar`] and is
//! instantiated for `f32` and `f64`. The simulation harness and the CLI only
//! use the `f64` instantiation (see the aliases at the crate root).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// A real floating-point type usable by the detection kernels.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Euler-Mascheroni constant.
    const EULER_GAMMA: Self;

    /// Converts an `f64` literal. Lossy for `f32` by construction.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw in `[lo, hi)`; returns `lo` when the interval is empty.
    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;

    /// Circularly-symmetric complex normal with unit variance, `CN(0, 1)`.
    fn sample_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex<Self> {
        let s = Self::FRAC_1_SQRT_2();
        Complex::new(
            Self::sample_standard_normal(rng) * s,
            Self::sample_standard_normal(rng) * s,
        )
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gamma:expr) => {
        impl Scalar for $t {
            const EULER_GAMMA: Self = $gamma;

            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                if hi > lo {
                    lo + (hi - lo) * rng.random::<$t>()
                } else {
                    lo
                }
            }
        }
    };
}

impl_scalar!(f32, 0.577_215_7_f32);
impl_scalar!(f64, 0.577_215_664_901_532_9_f64);

/// `exp(j * angle)`.
#[inline]
pub fn cis<T: Scalar>(angle: T) -> Complex<T> {
    Complex::new(angle.cos(), angle.sin())
}

/// Squared Euclidean norm of a complex slice.
pub fn norm_sqr<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `a^H b`.
pub fn dot_conj<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Largest componentwise modulus of `a - b`.
pub fn max_abs_diff<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complex_normal_has_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let p: f64 = (0..n)
            .map(|_| f64::sample_complex_normal(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn uniform_empty_interval_returns_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(f32::sample_uniform(&mut rng, 2.0, 2.0), 2.0);
        let v = f64::sample_uniform(&mut rng, -1.0, 1.0);
        assert!((-1.0..1.0).contains(&v));
    }
}

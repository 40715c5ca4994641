use num_complex::Complex;

use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::frontend::LinearizedModel;
use crate::linalg::CMatrix;
use crate::scalar::Scalar;

use super::DetectionResult;

/// Linear receiver `W = Σ_s Hᴴ (H Σ_s Hᴴ + R_n + U⁻¹ Σ_q U⁻ᴴ)⁻¹`, built once
/// per channel and applied to any number of observations.
#[derive(Debug, Clone)]
pub struct LmmseDetector<T> {
    /// `K × N` filter.
    pub filter: CMatrix<T>,
    constellation: ConstellationSpec<T>,
}

impl<T: Scalar> LmmseDetector<T> {
    /// `noise_cov` is `N₀I` or the coloured covariance; `model` carries `U`
    /// and `Σ_q`. Pass `None` for an unquantized receiver.
    pub fn new(
        h: &CMatrix<T>,
        noise_cov: &CMatrix<T>,
        model: Option<&LinearizedModel<T>>,
        constellation: &ConstellationSpec<T>,
    ) -> Result<Self> {
        let n = h.nrows();
        if noise_cov.nrows() != n || noise_cov.ncols() != n {
            return Err(Error::Shape(format!(
                "noise covariance is {}x{} for {n} antennas",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        let sigma_s = constellation.variance();
        let mut cov = h.mul(&h.adjoint())?.scale(sigma_s).add(noise_cov)?;
        if let Some(m) = model {
            if m.num_antennas() != n {
                return Err(Error::Shape(format!(
                    "linear model has {} antennas, H has {n}",
                    m.num_antennas()
                )));
            }
            cov = cov.add(&m.effective_noise_cov())?;
        }
        let lu = cov
            .lu()
            .map_err(|_| Error::Singular("LMMSE covariance is ill-conditioned"))?;
        // C is Hermitian, so W = Σ_s (C⁻¹ H)ᴴ.
        let solved: Vec<Vec<Complex<T>>> = (0..h.ncols()).map(|k| lu.solve(h.column(k))).collect::<Result<_>>()?;
        let filter = CMatrix::from_columns(&solved)?.adjoint().scale(sigma_s);
        Ok(Self {
            filter,
            constellation: constellation.clone(),
        })
    }

    /// Unquantized receiver under white noise in the `K × K` form
    /// `W = (HᴴH + (N₀/σ_s) I)⁻¹ Hᴴ`, which stays defined at `N₀ = 0`.
    pub fn white_unquantized(h: &CMatrix<T>, n0: T, constellation: &ConstellationSpec<T>) -> Result<Self> {
        let k = h.ncols();
        let gram = h.adjoint().mul(h)?;
        let reg = CMatrix::identity(k).scale(n0 / constellation.variance());
        let lu = gram
            .add(&reg)?
            .lu()
            .map_err(|_| Error::Singular("HᴴH is rank deficient"))?;
        let filter = lu.inverse()?.mul(&h.adjoint())?;
        Ok(Self {
            filter,
            constellation: constellation.clone(),
        })
    }

    pub fn soft_estimate(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.filter.mul_vec(y)
    }

    /// `ŝ = W y`, then the nearest constellation point per user.
    pub fn detect(&self, y: &[Complex<T>]) -> Result<DetectionResult<T>> {
        let soft = self.soft_estimate(y)?;
        let idx = soft.iter().map(|&s| self.constellation.nearest(s)).collect();
        Ok(DetectionResult::from_indices(idx, soft, &self.constellation))
    }
}

/// One-shot convenience wrapper around [`LmmseDetector`].
pub fn lmmse_detect<T: Scalar>(
    y: &[Complex<T>],
    h: &CMatrix<T>,
    noise_cov: &CMatrix<T>,
    model: Option<&LinearizedModel<T>>,
    constellation: &ConstellationSpec<T>,
) -> Result<DetectionResult<T>> {
    LmmseDetector::new(h, noise_cov, model, constellation)?.detect(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Modulation;
    use crate::frontend::{build_u_inverse, LinearizedModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_h(n: usize, k: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, k, |_, _| f64::sample_complex_normal(&mut rng))
    }

    #[test]
    fn huge_noise_shrinks_estimates() {
        let c = ConstellationSpec::standard(Modulation::Qpsk);
        let h = random_h(8, 2, 1);
        let det = LmmseDetector::new(&h, &CMatrix::identity(8).scale(1e12), None, &c).unwrap();
        assert!(det.filter.max_abs() < 1e-10);
    }

    #[test]
    fn noiseless_unquantized_recovers_symbols() {
        let c = ConstellationSpec::standard(Modulation::Qam16);
        let h = random_h(16, 4, 2);
        let s: Vec<_> = [3usize, 7, 0, 15].iter().map(|&i| c.points[i]).collect();
        let y = h.mul_vec(&s).unwrap();
        let r = lmmse_detect(&y, &h, &CMatrix::identity(16).scale(1e-9), None, &c).unwrap();
        assert_eq!(r.symbol_indices, vec![3, 7, 0, 15]);
        for (a, b) in r.soft_means.iter().zip(&s) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn white_form_matches_full_form_and_survives_zero_noise() {
        let c = ConstellationSpec::standard(Modulation::Qpsk);
        let h = random_h(10, 3, 5);
        let full = LmmseDetector::new(&h, &CMatrix::identity(10).scale(0.2), None, &c).unwrap();
        let small = LmmseDetector::white_unquantized(&h, 0.2, &c).unwrap();
        assert!(full.filter.max_abs_diff(&small.filter) < 1e-12);

        let s: Vec<_> = [1usize, 0, 3].iter().map(|&i| c.points[i]).collect();
        let y = h.mul_vec(&s).unwrap();
        let zf = LmmseDetector::white_unquantized(&h, 0.0, &c).unwrap();
        assert_eq!(zf.detect(&y).unwrap().symbol_indices, vec![1, 0, 3]);
    }

    #[test]
    fn matches_textbook_expression() {
        let c = ConstellationSpec::standard(Modulation::Qpsk);
        let n = 8;
        let h = random_h(n, 2, 3);
        let phi = 0.4;
        let sq = vec![0.2, 0.3, 0.35, 0.4, 0.42, 0.43, 0.44, 0.45];
        let model = LinearizedModel::new(phi, sq.clone());
        let n0 = 0.1;
        let det = LmmseDetector::new(&h, &CMatrix::identity(n).scale(n0), Some(&model), &c).unwrap();

        // W = Hᴴ (H Hᴴ + N₀I + U⁻¹ diag(σ_q) U⁻ᴴ)⁻¹ with an explicit inverse.
        let ui = build_u_inverse(n, phi);
        let dq = CMatrix::from_diagonal(&sq.iter().map(|&v| Complex::new(v, 0.0)).collect::<Vec<_>>());
        let cov = h
            .mul(&h.adjoint())
            .unwrap()
            .add(&CMatrix::identity(n).scale(n0))
            .unwrap()
            .add(&ui.mul(&dq).unwrap().mul(&ui.adjoint()).unwrap())
            .unwrap();
        let w = h.adjoint().mul(&cov.inverse().unwrap()).unwrap();
        assert!(w.max_abs_diff(&det.filter) < 1e-12);
    }
}

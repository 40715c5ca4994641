//! Symbol detectors for Σ∆-quantized uplink observations.

mod lmmse;
mod sdvb;

pub use lmmse::{lmmse_detect, LmmseDetector};
pub use sdvb::{recompute_residual, sdvb1_detect, sdvb2_detect, sdvb_detect, SdVbSolver, VbState};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::moments::symbol_log_scores;
use crate::scalar::{dot_conj, norm_sqr, Scalar};

/// Divisor used for `v_{N−1}` in the second-order sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailDivisor {
    /// `(u_{N−1} − 2e^{jφ}u_N)/5`, the exact coordinate minimizer.
    #[default]
    Derived,
    /// Divide by 2 instead, as in the compact listing of the algorithm.
    Listing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorOptions<T> {
    pub max_iters: usize,
    /// Stop once `max_k |Δ⟨s_k⟩|` falls below this; zero disables early stopping.
    pub tol: T,
    /// Gamma prior shape and rate.
    pub alpha: T,
    pub beta: T,
    pub tail_divisor: TailDivisor,
}

impl<T: Scalar> Default for DetectorOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: T::lit(1e-5),
            alpha: T::lit(1e-6),
            beta: T::lit(1e-6),
            tail_divisor: TailDivisor::Derived,
        }
    }
}

impl<T: Scalar> DetectorOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol >= T::zero()) {
            return Err(Error::Config("tol must be nonnegative".into()));
        }
        if !(self.alpha >= T::zero() && self.beta >= T::zero()) {
            return Err(Error::Config("gamma hyperparameters must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<T> {
    /// Indices into the constellation.
    pub symbol_indices: Vec<usize>,
    pub symbols: Vec<Complex<T>>,
    pub soft_means: Vec<Complex<T>>,
    pub iterations_used: usize,
    pub gamma_trace: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> DetectionResult<T> {
    pub(crate) fn from_indices(
        indices: Vec<usize>,
        soft_means: Vec<Complex<T>>,
        constellation: &ConstellationSpec<T>,
    ) -> Self {
        Self {
            symbols: indices.iter().map(|&i| constellation.points[i]).collect(),
            symbol_indices: indices,
            soft_means,
            iterations_used: 0,
            gamma_trace: Vec::new(),
            converged: true,
        }
    }

    pub fn count_errors(&self, truth: &[usize]) -> usize {
        self.symbol_indices.iter().zip(truth).filter(|(a, b)| a != b).count()
    }
}

/// Index of the largest score; the first one wins ties.
pub(crate) fn argmax_first<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Per user, `argmax_a p_a CN(z_k; h_k a, I/γ)` with `z_k = h_k⟨s_k⟩ + u`
/// taken from `state`. Ties go to the lowest constellation index.
pub fn decide_symbols<T: Scalar>(
    state: &VbState<T>,
    h: &CMatrix<T>,
    constellation: &ConstellationSpec<T>,
) -> Result<Vec<usize>> {
    if h.ncols() != state.s_mean.len() || h.nrows() != state.residual.len() {
        return Err(Error::Shape(format!(
            "state is {}x{} but H is {}x{}",
            state.residual.len(),
            state.s_mean.len(),
            h.nrows(),
            h.ncols()
        )));
    }
    Ok((0..h.ncols())
        .map(|k| {
            let hk = h.column(k);
            let hh = norm_sqr(hk);
            let hz = dot_conj(hk, &state.residual) + state.s_mean[k] * hh;
            argmax_first(&symbol_log_scores(hz, hh, state.gamma, constellation))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Modulation;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_first(&[0.0f64; 4]), 0);
    }

    #[test]
    fn decide_recovers_exact_symbol_and_breaks_ties_low() {
        let c = ConstellationSpec::<f64>::standard(Modulation::Qpsk);
        let h = CMatrix::from_columns(&[vec![Complex::new(0.6, 0.2), Complex::new(-0.1, 0.7)]]).unwrap();
        let a = c.points[3];
        let state = VbState {
            r_mean: vec![Complex::new(0.0, 0.0); 2],
            r_var: vec![0.0; 2],
            s_mean: vec![a],
            s_var: vec![0.0],
            gamma: 5.0,
            residual: vec![Complex::new(0.0, 0.0); 2],
        };
        assert_eq!(decide_symbols(&state, &h, &c).unwrap(), vec![3]);

        let zero = VbState {
            s_mean: vec![Complex::new(0.0, 0.0)],
            ..state
        };
        assert_eq!(decide_symbols(&zero, &h, &c).unwrap(), vec![0]);
    }

    #[test]
    fn options_validation() {
        let mut o = DetectorOptions::<f64>::default();
        assert_eq!(o.max_iters, 50);
        o.validate().unwrap();
        o.max_iters = 0;
        assert!(o.validate().is_err());
    }
}

//! Coordinate-ascent variational detectors for first- and second-order
//! spatial Σ∆ arrays.
//!
//! The residual `u_i = ⟨r_i⟩ − h_iᵀ⟨s⟩ − (feedback of earlier stages)` is
//! kept up to date incrementally, so one sweep costs O(NK) rather than
//! O(N²K).

use num_complex::Complex;
use num_traits::Zero;

use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::frontend::{SdOrder, SigmaDeltaCapture};
use crate::linalg::CMatrix;
use crate::moments::{discrete_posterior_stats, gamma_update_order1, gamma_update_order2, truncated_moments};
use crate::scalar::{cis, dot_conj, norm_sqr, Scalar};

use super::{decide_symbols, DetectionResult, DetectorOptions, TailDivisor};

#[derive(Debug, Clone, PartialEq)]
pub struct VbState<T> {
    pub r_mean: Vec<Complex<T>>,
    pub r_var: Vec<T>,
    pub s_mean: Vec<Complex<T>>,
    pub s_var: Vec<T>,
    pub gamma: T,
    pub residual: Vec<Complex<T>>,
}

/// From-scratch residual for the given state, O(NK).
pub fn recompute_residual<T: Scalar>(
    capture: &SigmaDeltaCapture<T>,
    h: &CMatrix<T>,
    r_mean: &[Complex<T>],
    s_mean: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let hs = h.mul_vec(s_mean)?;
    let y = &capture.observations;
    let c1 = cis(-capture.phase);
    let c2 = cis(-capture.phase * T::lit(2.0));
    let two = T::lit(2.0);
    let e = |i: usize| r_mean[i] - y[i];
    Ok((0..r_mean.len())
        .map(|i| {
            let mut u = r_mean[i] - hs[i];
            match capture.order {
                SdOrder::First => {
                    if i >= 1 {
                        u -= c1 * e(i - 1);
                    }
                }
                SdOrder::Second => {
                    if i >= 1 {
                        u -= c1 * e(i - 1) * two;
                    }
                    if i >= 2 {
                        u += c2 * e(i - 2);
                    }
                }
            }
            u
        })
        .collect())
}

/// Stateful solver exposing single iterations, so callers can inspect the
/// state or take decisions between sweeps.
#[derive(Debug, Clone)]
pub struct SdVbSolver<'a, T> {
    capture: &'a SigmaDeltaCapture<T>,
    h: &'a CMatrix<T>,
    constellation: &'a ConstellationSpec<T>,
    options: DetectorOptions<T>,
    h_norm2: Vec<T>,
    state: VbState<T>,
    gamma_trace: Vec<T>,
}

impl<'a, T: Scalar> SdVbSolver<'a, T> {
    /// Initial state: `⟨r⟩ = y`, `τ_r = 0`, `⟨s⟩ = 0`, `τ_s` = prior variance, `u = y`.
    pub fn new(
        capture: &'a SigmaDeltaCapture<T>,
        h: &'a CMatrix<T>,
        constellation: &'a ConstellationSpec<T>,
        options: DetectorOptions<T>,
    ) -> Result<Self> {
        options.validate()?;
        let n = capture.len();
        let k = h.ncols();
        if h.nrows() != n {
            return Err(Error::Shape(format!(
                "capture has {n} antennas, H has {} rows",
                h.nrows()
            )));
        }
        if n == 0 || k == 0 {
            return Err(Error::Shape("detector needs at least one antenna and one user".into()));
        }
        let y = capture.observations.clone();
        let state = VbState {
            r_mean: y.clone(),
            r_var: vec![T::zero(); n],
            s_mean: vec![Complex::zero(); k],
            s_var: vec![constellation.variance(); k],
            gamma: T::one(),
            residual: y,
        };
        Ok(Self {
            capture,
            h,
            constellation,
            options,
            h_norm2: (0..k).map(|j| norm_sqr(h.column(j))).collect(),
            state,
            gamma_trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &VbState<T> {
        &self.state
    }

    pub fn gamma_trace(&self) -> &[T] {
        &self.gamma_trace
    }

    pub fn iterations(&self) -> usize {
        self.gamma_trace.len()
    }

    fn trace_hsh(&self) -> T {
        self.state.s_var.iter().zip(&self.h_norm2).map(|(t, h)| *t * *h).sum()
    }

    /// One full sweep: precision, then antennas, then users. Returns
    /// `max_k |Δ⟨s_k⟩|`.
    pub fn iterate(&mut self) -> Result<T> {
        self.update_gamma()?;
        self.sweep_antennas();
        Ok(self.sweep_users())
    }

    fn update_gamma(&mut self) -> Result<()> {
        let tr = self.trace_hsh();
        let o = &self.options;
        let post = match self.capture.order {
            SdOrder::First => gamma_update_order1(&self.state.residual, &self.state.r_var, tr, o.alpha, o.beta)?,
            SdOrder::Second => gamma_update_order2(&self.state.residual, &self.state.r_var, tr, o.alpha, o.beta)?,
        };
        self.state.gamma = post.mean();
        self.gamma_trace.push(self.state.gamma);
        Ok(())
    }

    fn sweep_antennas(&mut self) {
        let n = self.capture.len();
        let phi = self.capture.phase;
        let c1 = cis(-phi);
        let c2 = cis(-phi * T::lit(2.0));
        let two = T::lit(2.0);
        let gamma = self.state.gamma;
        let tail = match self.options.tail_divisor {
            TailDivisor::Derived => T::lit(5.0),
            TailDivisor::Listing => T::lit(2.0),
        };
        let st = &mut self.state;
        for i in 0..n {
            let u = &st.residual;
            let (v, eps) = match self.capture.order {
                SdOrder::First => {
                    if i + 1 == n {
                        (st.r_mean[i] - u[i], T::one())
                    } else {
                        (st.r_mean[i] - (u[i] - c1.conj() * u[i + 1]) / two, two)
                    }
                }
                SdOrder::Second => {
                    if i + 1 == n {
                        (st.r_mean[i] - u[i], T::one())
                    } else if i + 2 == n {
                        (st.r_mean[i] - (u[i] - c1.conj() * u[i + 1] * two) / tail, T::lit(5.0))
                    } else {
                        let six = T::lit(6.0);
                        (
                            st.r_mean[i] - (u[i] - c1.conj() * u[i + 1] * two + c2.conj() * u[i + 2]) / six,
                            six,
                        )
                    }
                }
            };
            let m = truncated_moments(v, eps * gamma, self.capture.bin_low[i], self.capture.bin_up[i]);
            let delta = m.mean - st.r_mean[i];
            st.r_mean[i] = m.mean;
            st.r_var[i] = m.variance;
            st.residual[i] += delta;
            match self.capture.order {
                SdOrder::First => {
                    if i + 1 < n {
                        st.residual[i + 1] -= c1 * delta;
                    }
                }
                SdOrder::Second => {
                    if i + 1 < n {
                        st.residual[i + 1] -= c1 * delta * two;
                    }
                    if i + 2 < n {
                        st.residual[i + 2] += c2 * delta;
                    }
                }
            }
        }
    }

    fn sweep_users(&mut self) -> T {
        let gamma = self.state.gamma;
        let mut max_change = T::zero();
        for k in 0..self.h.ncols() {
            let hk = self.h.column(k);
            let hh = self.h_norm2[k];
            let old = self.state.s_mean[k];
            // hᴴ z_k with z_k = h_k⟨s_k⟩ + u.
            let hz = old * hh + dot_conj(hk, &self.state.residual);
            let post = discrete_posterior_stats(hz, hh, gamma, self.constellation);
            let delta = old - post.mean;
            self.state.s_mean[k] = post.mean;
            self.state.s_var[k] = post.variance;
            for (u, h) in self.state.residual.iter_mut().zip(hk) {
                *u += h * delta;
            }
            max_change = max_change.max(delta.norm());
        }
        max_change
    }

    pub fn decide(&self) -> Result<Vec<usize>> {
        decide_symbols(&self.state, self.h, self.constellation)
    }

    /// Iterates until `max_iters` or until the soft symbols stop moving.
    pub fn run(mut self) -> Result<DetectionResult<T>> {
        let mut converged = false;
        for _ in 0..self.options.max_iters {
            let change = self.iterate()?;
            if self.options.tol > T::zero() && change < self.options.tol {
                converged = true;
                break;
            }
        }
        let idx = self.decide()?;
        let mut out = DetectionResult::from_indices(idx, self.state.s_mean.clone(), self.constellation);
        out.iterations_used = self.iterations();
        out.gamma_trace = self.gamma_trace;
        out.converged = converged;
        Ok(out)
    }
}

/// Runs the detector matching the capture's Σ∆ order.
pub fn sdvb_detect<T: Scalar>(
    capture: &SigmaDeltaCapture<T>,
    h: &CMatrix<T>,
    options: &DetectorOptions<T>,
    constellation: &ConstellationSpec<T>,
) -> Result<DetectionResult<T>> {
    SdVbSolver::new(capture, h, constellation, *options)?.run()
}

pub fn sdvb1_detect<T: Scalar>(
    capture: &SigmaDeltaCapture<T>,
    h: &CMatrix<T>,
    options: &DetectorOptions<T>,
    constellation: &ConstellationSpec<T>,
) -> Result<DetectionResult<T>> {
    if capture.order != SdOrder::First {
        return Err(Error::Domain("first-order detector needs a first-order capture".into()));
    }
    sdvb_detect(capture, h, options, constellation)
}

pub fn sdvb2_detect<T: Scalar>(
    capture: &SigmaDeltaCapture<T>,
    h: &CMatrix<T>,
    options: &DetectorOptions<T>,
    constellation: &ConstellationSpec<T>,
) -> Result<DetectionResult<T>> {
    if capture.order != SdOrder::Second {
        return Err(Error::Domain(
            "second-order detector needs a second-order capture".into(),
        ));
    }
    sdvb_detect(capture, h, options, constellation)
}

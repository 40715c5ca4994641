//! Geometric mmWave channel for a uniform linear array, with optional
//! dipole mutual coupling and the coloured noise it induces.

use std::path::Path;

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cis, norm_sqr, Scalar};
use crate::special::{cosine_integral, sine_integral};

/// Uniform linear array: `N` elements spaced `d/λ` wavelengths apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<T> {
    pub num_antennas: usize,
    pub spacing_over_wavelength: T,
}

impl<T: Scalar> ArrayGeometry<T> {
    pub fn new(num_antennas: usize, spacing_over_wavelength: T) -> Result<Self> {
        let g = Self {
            num_antennas,
            spacing_over_wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas < 2 {
            return Err(Error::Domain(format!(
                "array needs at least 2 antennas, got {}",
                self.num_antennas
            )));
        }
        if !(self.spacing_over_wavelength > T::zero()) || !self.spacing_over_wavelength.is_finite() {
            return Err(Error::Domain(format!(
                "antenna spacing must be positive, got {}",
                self.spacing_over_wavelength
            )));
        }
        Ok(())
    }

    /// Spatial frequency `2π (d/λ) sin θ` of a plane wave from `theta_deg`.
    pub fn spatial_frequency(&self, theta_deg: T) -> T {
        T::TAU() * self.spacing_over_wavelength * theta_deg.to_radians().sin()
    }
}

/// Users' angles of arrival lie in `[center − spread/2, center + spread/2]` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularSector<T> {
    pub center_deg: T,
    pub spread_deg: T,
}

impl<T: Scalar> AngularSector<T> {
    pub fn new(center_deg: T, spread_deg: T) -> Result<Self> {
        if !(spread_deg >= T::zero()) {
            return Err(Error::Domain(format!("angular spread must be >= 0, got {spread_deg}")));
        }
        Ok(Self { center_deg, spread_deg })
    }

    pub fn bounds(&self) -> (T, T) {
        let half = self.spread_deg / T::lit(2.0);
        (self.center_deg - half, self.center_deg + half)
    }

    pub fn contains(&self, theta_deg: T) -> bool {
        let (lo, hi) = self.bounds();
        theta_deg >= lo && theta_deg <= hi
    }
}

/// ULA response `[1, e^{-jω}, …, e^{-j(N-1)ω}]` with `ω = 2π (d/λ) sin θ`.
pub fn steering_vector<T: Scalar>(theta_deg: T, geometry: &ArrayGeometry<T>) -> Vec<Complex<T>> {
    let omega = geometry.spatial_frequency(theta_deg);
    (0..geometry.num_antennas)
        .map(|i| cis(-omega * T::lit(i as f64)))
        .collect()
}

/// `K × L` table of i.i.d. uniform angles from the sector.
pub fn sample_user_aoas<T: Scalar, R: Rng + ?Sized>(
    num_users: usize,
    num_paths: usize,
    sector: &AngularSector<T>,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let (lo, hi) = sector.bounds();
    (0..num_users)
        .map(|_| (0..num_paths).map(|_| T::sample_uniform(rng, lo, hi)).collect())
        .collect()
}

/// How realised channel columns are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnNormalization {
    /// Every realised column has exactly unit norm.
    #[default]
    PerRealization,
    /// Unit norm on average over the small-scale fading, given the AoAs.
    InExpectation,
    /// Raw `sqrt(β/L) (T) A g` without rescaling.
    None,
}

#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    /// `N × K` channel matrix `H`.
    pub matrix: CMatrix<T>,
    /// Per-user path angles in degrees.
    pub aoas: Vec<Vec<T>>,
    /// Per-user small-scale fading `g_k`.
    pub path_gains: Vec<Vec<Complex<T>>>,
    /// Per-user large-scale gain `β_k`.
    pub large_scale: Vec<T>,
}

impl<T: Scalar> ChannelRealization<T> {
    pub fn num_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.matrix.ncols()
    }
}

/// `sqrt(β/L) · (T ·) A g` for one user.
pub fn channel_column<T: Scalar>(
    geometry: &ArrayGeometry<T>,
    aoas: &[T],
    gains: &[Complex<T>],
    beta: T,
    coupling: Option<&CMatrix<T>>,
) -> Result<Vec<Complex<T>>> {
    if aoas.len() != gains.len() {
        return Err(Error::Shape(format!(
            "{} angles but {} path gains",
            aoas.len(),
            gains.len()
        )));
    }
    let n = geometry.num_antennas;
    let amp = (beta / T::lit(aoas.len().max(1) as f64)).sqrt();
    let mut col = vec![Complex::zero(); n];
    for (&theta, &g) in aoas.iter().zip(gains) {
        for (c, a) in col.iter_mut().zip(steering_vector(theta, geometry)) {
            *c += a * g * amp;
        }
    }
    match coupling {
        Some(t) => t.mul_vec(&col),
        None => Ok(col),
    }
}

/// Draws one channel realisation: AoAs from the sector, `g_k ~ CN(0, I_L)`.
#[allow(clippy::too_many_arguments)]
pub fn generate_channel<T: Scalar, R: Rng + ?Sized>(
    geometry: &ArrayGeometry<T>,
    sector: &AngularSector<T>,
    num_users: usize,
    num_paths: usize,
    betas: &[T],
    coupling: Option<&CMatrix<T>>,
    normalization: ColumnNormalization,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    geometry.validate()?;
    let n = geometry.num_antennas;
    if betas.len() != num_users {
        return Err(Error::Shape(format!(
            "{} large-scale gains for {num_users} users",
            betas.len()
        )));
    }
    if let Some(&b) = betas.iter().find(|b| !(**b > T::zero())) {
        return Err(Error::Domain(format!("large-scale gain must be positive, got {b}")));
    }
    if let Some(t) = coupling {
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::Shape(format!(
                "coupling matrix is {}x{} but the array has {n} antennas",
                t.nrows(),
                t.ncols()
            )));
        }
    }

    let aoas = sample_user_aoas(num_users, num_paths, sector, rng);
    let path_gains: Vec<Vec<Complex<T>>> = (0..num_users)
        .map(|_| (0..num_paths).map(|_| T::sample_complex_normal(rng)).collect())
        .collect();

    let mut columns = Vec::with_capacity(num_users);
    for k in 0..num_users {
        let mut col = channel_column(geometry, &aoas[k], &path_gains[k], betas[k], coupling)?;
        let scale = match normalization {
            ColumnNormalization::PerRealization => {
                let p = norm_sqr(&col);
                if p > T::zero() {
                    p.sqrt().recip()
                } else {
                    T::one()
                }
            }
            ColumnNormalization::InExpectation => {
                // E_g ||sqrt(β/L) T A g||² = (β/L) Σ_l ||T a_l||².
                let mut e = T::zero();
                for &theta in &aoas[k] {
                    let a = steering_vector(theta, geometry);
                    let ta = match coupling {
                        Some(t) => t.mul_vec(&a)?,
                        None => a,
                    };
                    e += norm_sqr(&ta);
                }
                e = e * betas[k] / T::lit(num_paths.max(1) as f64);
                if e > T::zero() {
                    e.sqrt().recip()
                } else {
                    T::one()
                }
            }
            ColumnNormalization::None => T::one(),
        };
        col.iter_mut().for_each(|c| *c *= scale);
        columns.push(col);
    }

    Ok(ChannelRealization {
        matrix: CMatrix::from_columns(&columns)?,
        aoas,
        path_gains,
        large_scale: betas.to_vec(),
    })
}

/// Mutual impedance of two parallel half-wave dipoles `d/λ` wavelengths apart
/// (`d = 0` gives the self impedance), in ohms.
pub fn dipole_mutual_impedance<T: Scalar>(distance_over_wavelength: T) -> Result<Complex<T>> {
    let thirty = T::lit(30.0);
    let pi = T::PI();
    if distance_over_wavelength == T::zero() {
        let two_pi = T::TAU();
        return Ok(Complex::new(
            thirty * (T::EULER_GAMMA + two_pi.ln() - cosine_integral(two_pi)?),
            thirty * sine_integral(two_pi),
        ));
    }
    let d = distance_over_wavelength.abs();
    let u0 = T::TAU() * d;
    let xi = pi * (T::one() + T::lit(4.0) * d * d).sqrt();
    let two = T::lit(2.0);
    let re = two * cosine_integral(u0)? - cosine_integral(xi + pi)? - cosine_integral(xi - pi)?;
    let im = -two * sine_integral(u0) + sine_integral(xi + pi) + sine_integral(xi - pi);
    Ok(Complex::new(thirty * re, thirty * im))
}

/// `N × N` impedance matrix of a ULA of thin half-wave dipoles.
pub fn impedance_matrix<T: Scalar>(geometry: &ArrayGeometry<T>) -> Result<CMatrix<T>> {
    geometry.validate()?;
    let n = geometry.num_antennas;
    // Toeplitz: only |i - j| matters.
    let lags = (0..n)
        .map(|m| dipole_mutual_impedance(T::lit(m as f64) * geometry.spacing_over_wavelength))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]))
}

/// Circuit constants of the low-noise amplifier front-end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualCouplingParams<T> {
    pub lna_impedance_ohm: T,
    pub temperature_k: T,
    pub bandwidth_hz: T,
    pub boltzmann: T,
    pub noise_correlation: Complex<T>,
    pub current_noise_var: T,
    pub voltage_noise_var: T,
}

impl<T: Scalar> MutualCouplingParams<T> {
    /// `σ_i² = 2kTB/R` and `σ_u² = 2kTBR`, so that `R_c = R`.
    pub fn from_circuit(
        lna_impedance_ohm: T,
        temperature_k: T,
        bandwidth_hz: T,
        noise_correlation: Complex<T>,
    ) -> Self {
        let boltzmann = T::lit(1.380_649e-23);
        let ktb2 = T::lit(2.0) * boltzmann * temperature_k * bandwidth_hz;
        Self {
            lna_impedance_ohm,
            temperature_k,
            bandwidth_hz,
            boltzmann,
            noise_correlation,
            current_noise_var: ktb2 / lna_impedance_ohm,
            voltage_noise_var: ktb2 * lna_impedance_ohm,
        }
    }

    /// `R_c = σ_u / σ_i`.
    pub fn noise_resistance(&self) -> T {
        (self.voltage_noise_var / self.current_noise_var).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lna_impedance_ohm > T::zero()) {
            return Err(Error::Domain("LNA impedance must be positive".into()));
        }
        if !(self.current_noise_var > T::zero() && self.voltage_noise_var > T::zero()) {
            return Err(Error::Domain("LNA noise variances must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for MutualCouplingParams<T> {
    /// 50 Ω LNA at 290 K over 20 MHz, uncorrelated current/voltage noise.
    fn default() -> Self {
        Self::from_circuit(T::lit(50.0), T::lit(290.0), T::lit(20e6), Complex::zero())
    }
}

/// `T = (I + Z/R)^{-1}`.
pub fn coupling_matrix<T: Scalar>(z: &CMatrix<T>, params: &MutualCouplingParams<T>) -> Result<CMatrix<T>> {
    params.validate()?;
    let n = z.nrows();
    let m = CMatrix::identity(n).add(&z.scale(params.lna_impedance_ohm.recip()))?;
    m.inverse().map_err(|_| Error::Singular("I + Z/R is not invertible"))
}

/// Additive noise: white `N₀ I` or a full coloured covariance.
#[derive(Debug, Clone)]
pub struct NoiseModel<T> {
    pub covariance: CMatrix<T>,
    /// Mean per-antenna noise power, `Tr{R}/N`.
    pub n0: T,
    colored_factor: Option<CMatrix<T>>,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn white(num_antennas: usize, n0: T) -> Self {
        Self {
            covariance: CMatrix::identity(num_antennas).scale(n0),
            n0,
            colored_factor: None,
        }
    }

    pub fn colored(covariance: CMatrix<T>) -> Result<Self> {
        if !covariance.is_square() {
            return Err(Error::Shape("noise covariance must be square".into()));
        }
        let n = covariance.nrows();
        let factor = covariance.cholesky()?;
        let n0 = covariance.trace().re / T::lit(n as f64);
        Ok(Self {
            covariance,
            n0,
            colored_factor: Some(factor),
        })
    }

    pub fn is_colored(&self) -> bool {
        self.colored_factor.is_some()
    }

    pub fn num_antennas(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn trace(&self) -> T {
        self.covariance.trace().re
    }

    /// Same shape, every power multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            covariance: self.covariance.scale(factor),
            n0: self.n0 * factor,
            colored_factor: self.colored_factor.as_ref().map(|l| l.scale(factor.sqrt())),
        }
    }

    /// One draw of `n ~ CN(0, R)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex<T>> {
        let n = self.num_antennas();
        let w: Vec<Complex<T>> = (0..n).map(|_| T::sample_complex_normal(rng)).collect();
        match &self.colored_factor {
            Some(l) => l.mul_vec(&w).expect("factor is N x N"),
            None => {
                let s = self.n0.sqrt();
                w.into_iter().map(|c| c * s).collect()
            }
        }
    }
}

/// `R = T (σ_i² (Z Z^H + R_c² I − 2 R_c Re{ρ* Z}) + 4kTB Re{Z}) T^H`.
pub fn noise_covariance<T: Scalar>(
    coupling: &CMatrix<T>,
    z: &CMatrix<T>,
    params: &MutualCouplingParams<T>,
) -> Result<NoiseModel<T>> {
    params.validate()?;
    let n = z.nrows();
    if !z.is_square() || coupling.nrows() != n || coupling.ncols() != n {
        return Err(Error::Shape("coupling and impedance matrices must be N x N".into()));
    }
    let rc = params.noise_resistance();
    let two = T::lit(2.0);
    let rho_conj = params.noise_correlation.conj();
    let zzh = z.mul(&z.adjoint())?;
    let re_rho_z = z.map(|v| Complex::new((rho_conj * v).re, T::zero()));
    let re_z = z.map(|v| Complex::new(v.re, T::zero()));
    let inner = zzh
        .add(&CMatrix::identity(n).scale(rc * rc))?
        .sub(&re_rho_z.scale(two * rc))?
        .scale(params.current_noise_var)
        .add(&re_z.scale(T::lit(4.0) * params.boltzmann * params.temperature_k * params.bandwidth_hz))?;
    let r = coupling.mul(&inner)?.mul(&coupling.adjoint())?;
    NoiseModel::colored(r)
}

/// Noise scaled so that `SNR = K / Tr{R}`; white noise gives `N₀ = K / (N · SNR)`.
pub fn noise_for_snr<T: Scalar>(
    snr_db: T,
    num_users: usize,
    num_antennas: usize,
    coupled: Option<&NoiseModel<T>>,
) -> NoiseModel<T> {
    let snr = T::lit(10.0).powf(snr_db / T::lit(10.0));
    let k = T::lit(num_users as f64);
    match coupled {
        None => NoiseModel::white(num_antennas, k / (T::lit(num_antennas as f64) * snr)),
        Some(model) => model.scaled(k / (snr * model.trace())),
    }
}

/// Writes `H` as CSV: one row per antenna, columns `re_1, im_1, …, re_K, im_K`.
pub fn write_channel_csv<T: Scalar>(path: &Path, h: &CMatrix<T>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = (1..=h.ncols())
        .flat_map(|k| [format!("re_{k}"), format!("im_{k}")])
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..h.nrows() {
        let row: Vec<String> = (0..h.ncols())
            .flat_map(|k| {
                let v = h[(i, k)];
                [format!("{:e}", v.re), format!("{:e}", v.im)]
            })
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Unit-modulus check used by invariants: every entry has `|z| = 1`.
pub fn is_unit_modulus<T: Scalar>(v: &[Complex<T>], tol: T) -> bool {
    v.iter().all(|z| (z.norm() - T::one()).abs() <= tol)
}

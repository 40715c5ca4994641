use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" | "16-qam" => Ok(Modulation::Qam16),
            other => Err(Error::Config(format!(
                "unknown constellation `{other}` (expected bpsk, qpsk or 16qam)"
            ))),
        }
    }
}

/// Finite symbol alphabet with prior probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec<T> {
    pub points: Vec<Complex<T>>,
    pub priors: Vec<T>,
}

impl<T: Scalar> ConstellationSpec<T> {
    /// Validates and stores an arbitrary alphabet.
    pub fn new(points: Vec<Complex<T>>, priors: Vec<T>) -> Result<Self> {
        if points.is_empty() || points.len() != priors.len() {
            return Err(Error::Shape(format!(
                "{} points with {} priors",
                points.len(),
                priors.len()
            )));
        }
        if priors.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::Domain("priors must be nonnegative".into()));
        }
        let total: T = priors.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::Domain(format!("priors sum to {total}, not 1")));
        }
        Ok(Self { points, priors })
    }

    /// Equiprobable points scaled to unit average energy.
    pub fn uniform_normalized(points: Vec<Complex<T>>) -> Self {
        let m = T::lit(points.len() as f64);
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<T>() / m;
        let s = energy.sqrt().recip();
        Self {
            points: points.into_iter().map(|p| p * s).collect(),
            priors: vec![m.recip(); m.to_f64_lossy() as usize],
        }
    }

    pub fn standard(kind: Modulation) -> Self {
        let c = |re: f64, im: f64| Complex::new(T::lit(re), T::lit(im));
        let points = match kind {
            Modulation::Bpsk => vec![c(-1.0, 0.0), c(1.0, 0.0)],
            Modulation::Qpsk => vec![c(1.0, 1.0), c(-1.0, 1.0), c(-1.0, -1.0), c(1.0, -1.0)],
            Modulation::Qam16 => {
                let amps = [-3.0, -1.0, 1.0, 3.0];
                amps.iter()
                    .flat_map(|&re| amps.iter().map(move |&im| (re, im)))
                    .map(|(re, im)| c(re, im))
                    .collect()
            }
        };
        Self::uniform_normalized(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Complex<T> {
        self.points
            .iter()
            .zip(&self.priors)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, p)| acc + a * *p)
    }

    pub fn mean_energy(&self) -> T {
        self.points
            .iter()
            .zip(&self.priors)
            .map(|(a, p)| a.norm_sqr() * *p)
            .sum()
    }

    /// Prior variance `E|s|² − |E s|²`.
    pub fn variance(&self) -> T {
        self.mean_energy() - self.mean().norm_sqr()
    }

    /// Index of the closest point; ties go to the lowest index.
    pub fn nearest(&self, z: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, a) in self.points.iter().enumerate() {
            let d = (z - a).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Draws a point index from the prior.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::sample_uniform(rng, T::zero(), T::one());
        let mut acc = T::zero();
        for (i, p) in self.priors.iter().enumerate() {
            acc += *p;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }
}

//! Small dense complex linear algebra, generic over [`Scalar`].
//!
//! Storage is column-major so that channel columns `h_k` are contiguous,
//! which is the access pattern of the variational detectors.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from its columns; all columns must share one length.
    pub fn from_columns(columns: &[Vec<Complex<T>>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns have differing lengths".into()));
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data: columns.concat(),
        })
    }

    pub fn from_diagonal(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[Complex<T>] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [Complex<T>] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<Complex<T>> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal().into_iter().sum()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = j * self.rows;
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b.is_zero() {
                    continue;
                }
                let src = self.column(k);
                for (o, a) in out.data[dst..dst + self.rows].iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if self.cols != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![Complex::zero(); self.rows];
        for (k, &b) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.column(k)) {
                *o += a * b;
            }
        }
        Ok(out)
    }

    /// `A^H v`.
    pub fn adjoint_mul_vec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if self.rows != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply adjoint of {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.cols)
            .map(|k| crate::scalar::dot_conj(self.column(k), v))
            .collect())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        crate::scalar::max_abs_diff(&self.data, &other.data)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        crate::scalar::norm_sqr(&self.data).sqrt()
    }

    pub fn hermitian_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        self.max_abs_diff(&self.adjoint())
    }

    pub fn symmetric_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        self.max_abs_diff(&self.transpose())
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu<T>> {
        if !self.is_square() {
            return Err(Error::Shape("LU requires a square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.max_abs().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, T::neg_infinity()), |best, c| if c.1 > best.1 { c } else { best });
            if !(pmax > tiny) {
                return Err(Error::Singular("zero pivot in LU"));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = a[(p, j)];
                    a[(p, j)] = a[(k, j)];
                    a[(k, j)] = tmp;
                }
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)] / pivot;
                a[(i, k)] = l;
                if l.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= l * akj;
                }
            }
        }
        Ok(Lu { factors: a, perm })
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu()?.inverse()
    }

    /// Lower Cholesky factor `L` with `A = L L^H` for Hermitian positive-definite `A`.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape("Cholesky requires a square matrix".into()));
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite("non-positive pivot in Cholesky"));
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Packed LU factors (`L` unit lower, `U` upper) and the row permutation.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    factors: CMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Shape(format!("rhs length {} for system of size {n}", b.len())));
        }
        let a = &self.factors;
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= a[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= a[(i, k)] * x[k];
            }
            x[i] = s / a[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix<T>> {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![Complex::zero(); n];
        for j in 0..n {
            e[j] = Complex::one();
            cols.push(self.solve(&e)?);
            e[j] = Complex::zero();
        }
        CMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| f64::sample_complex_normal(&mut rng))
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = random_matrix(12, 1);
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv).unwrap();
        assert!(prod.max_abs_diff(&CMatrix::identity(12)) < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut a = random_matrix(4, 2);
        for i in 0..4 {
            let v = a[(i, 0)];
            a[(i, 3)] = v * 2.0;
        }
        assert!(matches!(a.lu(), Err(Error::Singular(_))));
    }

    #[test]
    fn cholesky_reconstructs_gram_matrix() {
        let b = random_matrix(6, 3);
        let a = b.mul(&b.adjoint()).unwrap().add(&CMatrix::identity(6)).unwrap();
        let l = a.cholesky().unwrap();
        let back = l.mul(&l.adjoint()).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-10);
        assert!(a.scale(-1.0).cholesky().is_err());
    }

    #[test]
    fn adjoint_mul_vec_matches_explicit_adjoint() {
        let a = CMatrix::<f64>::from_fn(5, 3, |i, j| Complex::new(i as f64, j as f64 - 1.0));
        let v: Vec<_> = (0..5).map(|i| Complex::new(1.0, i as f64)).collect();
        let lhs = a.adjoint_mul_vec(&v).unwrap();
        let rhs = a.adjoint().mul_vec(&v).unwrap();
        assert!(crate::scalar::max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn f32_instantiation_solves() {
        let a = CMatrix::<f32>::from_fn(3, 3, |i, j| {
            Complex::new(if i == j { 4.0 } else { 1.0 }, (i as f32 - j as f32) * 0.5)
        });
        let x = vec![
            Complex::new(1.0f32, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 2.0),
        ];
        let b = a.mul_vec(&x).unwrap();
        let sol = a.lu().unwrap().solve(&b).unwrap();
        assert!(crate::scalar::max_abs_diff(&sol, &x) < 1e-5);
    }
}

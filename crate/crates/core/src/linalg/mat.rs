//! Dense complex matrices and vector helpers.
//!
//! Storage is row-major. The workloads here are small dense Hermitian
//! problems (dimensions up to a few hundred), so the implementations favor
//! clarity over blocking or SIMD.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[Complex<T>]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Real diagonal matrix.
    pub fn from_real_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(*d, T::zero());
        }
        m
    }

    /// Column vector from a slice.
    pub fn col_from(v: &[Complex<T>]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Checks all entries are finite.
    pub fn ensure_finite(&self) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn ensure_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self + s * other`, elementwise.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let lhs_row = i * rhs.cols;
                let rhs_row = k * rhs.cols;
                for j in 0..rhs.cols {
                    out.data[lhs_row + j] = out.data[lhs_row + j] + a * rhs.data[rhs_row + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "matvec dimension");
        (0..self.rows)
            .map(|i| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..self.cols {
                    acc += self[(i, j)] * v[j];
                }
                acc
            })
            .collect()
    }

    /// `A^H v` without materializing the adjoint.
    pub fn adjoint_matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.rows, v.len(), "adjoint_matvec dimension");
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += self[(i, j)].conj() * vi;
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        let n = self.rows.min(self.cols);
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            acc += self[(i, i)];
        }
        acc
    }

    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Largest deviation from Hermitian symmetry, `max |A - A^H|`.
    pub fn hermitian_error(&self) -> T {
        assert!(self.is_square());
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self[(i, j)] - self[(j, i)].conj();
                let m = d.norm();
                if m > worst {
                    worst = m;
                }
            }
        }
        worst
    }

    /// Hermitian part `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        let half = T::of(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * half
        })
    }

    /// Outer product `u v^H`.
    pub fn outer(u: &[Complex<T>], v: &[Complex<T>]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out[(r0 + i, c0 + j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Square submatrix restricted to the given row/column indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        assert!(self.is_square());
        Self::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// Real part of `tr(self * other)`; for Hermitian pairs this is the
    /// Frobenius inner product.
    pub fn trace_product_re(&self, other: &Self) -> T {
        assert_eq!(self.cols, other.rows, "trace_product dimension");
        assert_eq!(self.rows, other.cols, "trace_product dimension");
        let mut acc = T::zero();
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                let b = other[(k, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }
}

impl<T: Real> Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: &CMat<T>) -> CMat<T> {
        self.matmul(rhs)
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for CMat<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = &self.data[i * self.cols + j];
                write!(f, "{:?}{:+?}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// ----------------------------------------------------------------------
// Vector helpers
// ----------------------------------------------------------------------

/// Inner product `a^H b`.
pub fn cdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    assert_eq!(a.len(), b.len(), "cdot dimension");
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sq<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).fold(T::zero(), |x, y| x + y)
}

pub fn norm<T: Real>(a: &[Complex<T>]) -> T {
    norm_sq(a).sqrt()
}

pub fn scale_vec<T: Real>(a: &[Complex<T>], s: Complex<T>) -> Vec<Complex<T>> {
    a.iter().map(|z| z * s).collect()
}

pub fn add_vec<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn zeros_vec<T: Real>(n: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::zero(), T::zero()); n]
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = CMat<f64>;
    type C64 = Complex<f64>;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_identity() {
        let a = M::from_fn(3, 3, |i, j| c((i * 3 + j) as f64, -(j as f64)));
        let i3 = M::identity(3);
        assert_eq!(a.matmul(&i3), a);
        assert_eq!(i3.matmul(&a), a);
    }

    #[test]
    fn adjoint_involution() {
        let a = M::from_fn(2, 4, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn trace_product_matches_dense() {
        let a = M::from_fn(3, 3, |i, j| c((i + j) as f64, (i as f64) - (j as f64)));
        let a = a.hermitian_part();
        let b = M::from_fn(3, 3, |i, j| c((2 * i + j) as f64, (j as f64) * 0.5 - i as f64));
        let b = b.hermitian_part();
        let dense = a.matmul(&b).trace();
        assert!((a.trace_product_re(&b) - dense.re).abs() < 1e-12);
        assert!(dense.im.abs() < 1e-12);
    }

    #[test]
    fn block_diag_and_submatrix() {
        let a = M::identity(2).scale(2.0);
        let b = M::from_fn(1, 1, |_, _| c(5.0, 1.0));
        let d = M::block_diag(&[&a, &b]);
        assert_eq!(d.rows(), 3);
        assert_eq!(d[(2, 2)], c(5.0, 1.0));
        assert_eq!(d[(0, 2)], c(0.0, 0.0));
        let s = d.principal_submatrix(&[0, 2]);
        assert_eq!(s[(0, 0)], c(2.0, 0.0));
        assert_eq!(s[(1, 1)], c(5.0, 1.0));
    }

    #[test]
    fn non_finite_detected() {
        let mut a = M::zeros(2, 2);
        a[(1, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(
            a.ensure_finite(),
            Err(crate::error::Error::NonFinite { row: 1, col: 0 })
        ));
    }
}

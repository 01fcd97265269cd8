//! Hermitian eigendecomposition.
//!
//! The factorization runs in three stages: a complex Householder reduction
//! to tridiagonal form, a unitary diagonal rescaling that makes the
//! off-diagonal real and non-negative, and the classic implicit-shift QL
//! iteration on the real tridiagonal matrix with the rotations accumulated
//! into the complex transform. Eigenvalues are returned in descending
//! order with orthonormal eigenvector columns.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::mat::CMat;
use crate::scalar::Real;

/// Eigendecomposition `A = U diag(eigenvalues) U^H` of a Hermitian matrix.
#[derive(Clone)]
pub struct HermitianEvd<T> {
    /// Real eigenvalues, descending.
    pub eigenvalues: Vec<T>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub eigenvectors: CMat<T>,
}

impl<T: Real> HermitianEvd<T> {
    /// Reconstructs `U f(Λ) U^H` for a spectral function `f`.
    pub fn map_spectrum(&self, mut f: impl FnMut(T) -> T) -> CMat<T> {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let mut scaled = CMat::zeros(n, n);
        for j in 0..n {
            let fj = f(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] = u[(i, j)] * fj;
            }
        }
        scaled.matmul(&u.adjoint())
    }

    /// Reconstructs the original matrix.
    pub fn reconstruct(&self) -> CMat<T> {
        self.map_spectrum(|x| x)
    }
}

/// Hermitian eigendecomposition with descending eigenvalues.
///
/// The input is symmetrized as `(A + A^H)/2` before factoring, so mild
/// floating-point asymmetry from accumulated products is tolerated.
pub fn hermitian_evd<T: Real>(a: &CMat<T>) -> Result<HermitianEvd<T>> {
    a.ensure_square()?;
    a.ensure_finite()?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::Dimension("eigendecomposition of empty matrix".into()));
    }

    let mut m = a.hermitian_part();
    let zero = Complex::new(T::zero(), T::zero());

    // Householder reduction to (complex) tridiagonal form.
    struct Reflector<T> {
        start: usize,
        v: Vec<Complex<T>>,
        tau: T,
    }
    let mut reflectors: Vec<Reflector<T>> = Vec::new();

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut xnorm_sq = T::zero();
        for i in 0..len {
            xnorm_sq += m[(k + 1 + i, k)].norm_sqr();
        }
        let xnorm = xnorm_sq.sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let alpha = m[(k + 1, k)];
        let phase = if alpha.norm() > T::zero() {
            alpha / alpha.norm()
        } else {
            Complex::new(T::one(), T::zero())
        };

        let mut v = vec![zero; len];
        v[0] = alpha + phase * xnorm;
        for i in 1..len {
            v[i] = m[(k + 1 + i, k)];
        }
        let vnorm_sq = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |x, y| x + y);
        let tau = T::of(2.0) / vnorm_sq;

        // New subdiagonal entry; the rest of the column is annihilated.
        let beta = -phase * xnorm;
        m[(k + 1, k)] = beta;
        m[(k, k + 1)] = beta.conj();
        for row in (k + 2)..n {
            m[(row, k)] = zero;
            m[(k, row)] = zero;
        }

        // Rank-2 update of the trailing block: B <- B - v w^H - w v^H
        // with p = tau * B v and w = p - (tau/2)(v^H p) v.
        let mut p = vec![zero; len];
        for i in 0..len {
            let mut acc = zero;
            for j in 0..len {
                acc += m[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = acc * tau;
        }
        let vhp: Complex<T> = v
            .iter()
            .zip(&p)
            .map(|(vi, pi)| vi.conj() * pi)
            .fold(zero, |x, y| x + y);
        let gamma = vhp.re * tau * T::of(0.5);
        let w: Vec<Complex<T>> = p
            .iter()
            .zip(&v)
            .map(|(pi, vi)| pi - vi * gamma)
            .collect();
        for i in 0..len {
            for j in 0..len {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                m[(k + 1 + i, k + 1 + j)] = m[(k + 1 + i, k + 1 + j)] - upd;
            }
        }

        reflectors.push(Reflector { start: k + 1, v, tau });
    }

    // Accumulate Q = H_0 H_1 ... (post-multiplying preserves the order).
    let mut q = CMat::<T>::identity(n);
    for r in &reflectors {
        let len = r.v.len();
        for i in 0..n {
            let mut u = zero;
            for j in 0..len {
                u += q[(i, r.start + j)] * r.v[j];
            }
            let ut = u * r.tau;
            for j in 0..len {
                q[(i, r.start + j)] = q[(i, r.start + j)] - ut * r.v[j].conj();
            }
        }
    }

    // Unitary diagonal rescaling making the off-diagonal real non-negative.
    let mut d: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut e: Vec<T> = vec![T::zero(); n];
    let mut delta = Complex::new(T::one(), T::zero());
    for k in 0..n.saturating_sub(1) {
        let t = m[(k + 1, k)];
        let tn = t.norm();
        e[k] = tn;
        delta = if tn > T::zero() { delta * (t / tn) } else { delta };
        for i in 0..n {
            q[(i, k + 1)] = q[(i, k + 1)] * delta;
        }
    }

    tql2(&mut d, &mut e, &mut q)?;

    // Sort descending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("finite eigenvalues"));
    let eigenvalues: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = CMat::from_fn(n, n, |i, j| q[(i, order[j])]);

    Ok(HermitianEvd {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue<T: Real>(a: &CMat<T>) -> Result<T> {
    Ok(hermitian_evd(a)?.eigenvalues[0])
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Real>(a: &CMat<T>) -> Result<T> {
    let evd = hermitian_evd(a)?;
    Ok(*evd.eigenvalues.last().expect("non-empty spectrum"))
}

/// Implicit-shift QL iteration on a real symmetric tridiagonal matrix,
/// accumulating the (real) plane rotations into the complex columns of `v`.
///
/// `d` holds the diagonal, `e[i]` the subdiagonal entry coupling `i` and
/// `i+1` (`e[n-1]` is scratch). Classic EISPACK/Jama structure.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], v: &mut CMat<T>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();

    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        let cand = d[l].abs() + e[l].abs();
        if cand > tst1 {
            tst1 = cand;
        }

        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > 64 {
                    return Err(Error::NoConvergence { index: l });
                }

                // Wilkinson-style shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::of(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // Implicit QL sweep from m down to l.
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g2 = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g2;
                    d[i + 1] = h + s * (c * g2 + s * d[i]);

                    for row in 0..n {
                        let tmp = v[(row, i + 1)];
                        v[(row, i + 1)] = v[(row, i)] * s + tmp * c;
                        v[(row, i)] = v[(row, i)] * c - tmp * s;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

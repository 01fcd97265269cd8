//! Cholesky factorization and Hermitian positive-definite solves.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::mat::CMat;
use crate::scalar::Real;

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
///
/// The input is symmetrized before factoring. Fails with
/// [`Error::NotPositiveDefinite`] when a pivot drops below
/// `1e-12 * max diagonal`, which covers both singular and indefinite
/// inputs.
pub fn cholesky<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    a.ensure_square()?;
    a.ensure_finite()?;
    let n = a.rows();
    let h = a.hermitian_part();

    let mut max_diag = T::zero();
    for i in 0..n {
        let d = h[(i, i)].re;
        if d > max_diag {
            max_diag = d;
        }
    }
    let threshold = max_diag * T::of(1e-12);

    let zero = Complex::new(T::zero(), T::zero());
    let mut l = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = h[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            if i == j {
                let pivot = acc.re;
                if !(pivot > threshold) || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        pivot: pivot.to_f64().unwrap_or(f64::NAN),
                    });
                }
                l[(i, i)] = Complex::new(pivot.sqrt(), T::zero());
            } else {
                l[(i, j)] = acc / l[(j, j)].re;
            }
        }
        for j in (i + 1)..n {
            l[(i, j)] = zero;
        }
    }
    Ok(l)
}

/// Solves `L X = B` with `L` lower triangular.
pub fn solve_lower<T: Real>(l: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!(l.rows(), b.rows(), "solve_lower dimension");
    let n = l.rows();
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut acc = x[(i, col)];
            for k in 0..i {
                acc -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = acc / l[(i, i)].re;
        }
    }
    x
}

/// Solves `L^H X = B` with `L` lower triangular (so `L^H` is upper).
pub fn solve_lower_adjoint<T: Real>(l: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!(l.rows(), b.rows(), "solve_lower_adjoint dimension");
    let n = l.rows();
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, col)];
            for k in (i + 1)..n {
                acc -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = acc / l[(i, i)].re;
        }
    }
    x
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hermitian<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<CMat<T>> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "solve_hermitian: lhs is {}x{}, rhs is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    b.ensure_finite()?;
    let l = cholesky(a)?;
    let y = solve_lower(&l, b);
    Ok(solve_lower_adjoint(&l, &y))
}

/// Solves `A x = b` for a single right-hand-side vector.
pub fn solve_hermitian_vec<T: Real>(a: &CMat<T>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let x = solve_hermitian(a, &CMat::col_from(b))?;
    Ok(x.col_vec(0))
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hermitian<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    let inv = solve_hermitian(a, &CMat::identity(a.rows()))?;
    Ok(inv.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = CMat<f64>;
    type C64 = Complex<f64>;

    fn random_spd(n: usize, seed: u64) -> M {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = M::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        b.matmul(&b.adjoint()).add(&M::identity(n).scale(0.1))
    }

    #[test]
    fn identity_solve() {
        let b = M::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
        let x = solve_hermitian(&M::identity(3), &b).unwrap();
        assert!(x.sub(&b).fro_norm() < 1e-14);
    }

    #[test]
    fn scalar_solve() {
        // A = 2I, B = I  ->  X = 0.5 I
        let a = M::identity(4).scale(2.0);
        let x = solve_hermitian(&a, &M::identity(4)).unwrap();
        assert!(x.sub(&M::identity(4).scale(0.5)).fro_norm() < 1e-14);
    }

    #[test]
    fn residual_small_on_random_spd() {
        for seed in 0..4 {
            let a = random_spd(10, seed);
            let b = M::from_fn(10, 3, |i, j| C64::new((i + j) as f64, i as f64 - 1.0));
            let x = solve_hermitian(&a, &b).unwrap();
            let rel = a.matmul(&x).sub(&b).fro_norm() / b.fro_norm();
            assert!(rel < 1e-9, "seed {seed}: residual {rel:e}");
        }
    }

    #[test]
    fn factor_reconstructs() {
        let a = random_spd(7, 42);
        let l = cholesky(&a).unwrap();
        let rel = l.matmul(&l.adjoint()).sub(&a).fro_norm() / a.fro_norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let a = M::from_real_diag(&[1.0, -2.0, 3.0]);
        assert!(matches!(
            cholesky(&a),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
        // Singular rank-1.
        let v = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let s = M::outer(&v, &v);
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { .. })));
    }
}

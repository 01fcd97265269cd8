//! Dense semidefinite programming in standard primal form.
//!
//! Solves `maximize/minimize tr(C X)` subject to `tr(A_i X) = b_i` and
//! `X ⪰ 0` over complex Hermitian matrices, using an infeasible-start
//! primal-dual path-following interior-point method with Nesterov-Todd
//! scaling and a Mehrotra-style centering heuristic. Problem sizes here
//! are small (dimension and constraint count up to a couple hundred), so
//! the Schur complement is formed densely and factored by Cholesky.
//!
//! A problem can be dumped to a structured text file for offline
//! inspection; see [`SdpProblem::dump`] for the exact format.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, hermitian_evd, solve_hermitian, solve_lower, CMat};
use crate::scalar::Real;

/// Default KKT tolerance.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Standard-form SDP: optimize `tr(C X)` s.t. `tr(A_i X) = b_i`, `X ⪰ 0`.
#[derive(Clone)]
pub struct SdpProblem<T> {
    /// Hermitian objective matrix.
    pub objective: CMat<T>,
    /// Equality constraints `(A_i, b_i)` with Hermitian `A_i`.
    pub constraints: Vec<(CMat<T>, T)>,
    pub sense: Sense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Final KKT residuals (all relative).
#[derive(Clone, Copy, Debug)]
pub struct KktResiduals<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
}

impl<T: Real> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// One recorded interior-point iterate, for duality diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct SdpIterate<T> {
    /// `tr(C X)` in the maximization sense.
    pub primal_objective: T,
    /// `b^T y` in the maximization sense.
    pub dual_objective: T,
    /// Complementarity inner product `tr(X Z) >= 0`.
    pub xz_inner: T,
    /// `tr(R_d X)` where `R_d` is the dual residual matrix.
    pub dual_residual_x: T,
    /// `r_p^T y` where `r_p` is the primal residual vector.
    pub primal_residual_y: T,
    pub mu: T,
}

#[derive(Clone)]
pub struct SdpSolution<T> {
    /// Hermitian PSD primal solution.
    pub x: CMat<T>,
    /// Equality multipliers of the maximization form.
    pub dual: Vec<T>,
    /// `tr(C X)` in the problem's own sense.
    pub objective_value: T,
    pub status: SdpStatus,
    pub kkt: KktResiduals<T>,
    pub iterations: usize,
    /// Per-iterate objective/gap records.
    pub trace: Vec<SdpIterate<T>>,
}

impl<T: Real> SdpProblem<T> {
    pub fn dim(&self) -> usize {
        self.objective.rows()
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.ensure_square()?;
        self.objective.ensure_finite()?;
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidConfig("SDP variable has dimension 0".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::InvalidConfig(
                "SDP needs at least one equality constraint".into(),
            ));
        }
        let scale = T::one() + self.objective.max_abs();
        if self.objective.hermitian_error() > T::of(1e-8) * scale {
            return Err(Error::InvalidConfig("objective matrix is not Hermitian".into()));
        }
        for (i, (a, b)) in self.constraints.iter().enumerate() {
            a.ensure_square()?;
            a.ensure_finite()?;
            if a.rows() != n {
                return Err(Error::Dimension(format!(
                    "constraint {} has dimension {}, expected {}",
                    i,
                    a.rows(),
                    n
                )));
            }
            let s = T::one() + a.max_abs();
            if a.hermitian_error() > T::of(1e-8) * s {
                return Err(Error::InvalidConfig(format!(
                    "constraint matrix {} is not Hermitian",
                    i
                )));
            }
            if !b.is_finite() {
                return Err(Error::InvalidConfig(format!("b[{}] is not finite", i)));
            }
        }
        Ok(())
    }

    /// Writes the problem as structured text: a header with the dimension,
    /// constraint count and sense, then each matrix in row-major `re im`
    /// pairs (objective first, then every `A_i`), then the `b` vector.
    pub fn dump<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.dim();
        writeln!(out, "sdp-problem v1")?;
        writeln!(out, "dim {}", n)?;
        writeln!(out, "constraints {}", self.constraints.len())?;
        writeln!(
            out,
            "sense {}",
            match self.sense {
                Sense::Maximize => "max",
                Sense::Minimize => "min",
            }
        )?;
        let write_mat = |out: &mut W, m: &CMat<T>| -> std::io::Result<()> {
            for i in 0..m.rows() {
                let mut line = String::new();
                for j in 0..m.cols() {
                    let z = m[(i, j)];
                    if j > 0 {
                        line.push(' ');
                    }
                    line.push_str(&format!("{:e} {:e}", z.re, z.im));
                }
                writeln!(out, "{}", line)?;
            }
            Ok(())
        };
        writeln!(out, "C")?;
        write_mat(out, &self.objective)?;
        for (i, (a, _)) in self.constraints.iter().enumerate() {
            writeln!(out, "A {}", i)?;
            write_mat(out, a)?;
        }
        writeln!(out, "b")?;
        let mut line = String::new();
        for (i, (_, b)) in self.constraints.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:e}", b));
        }
        writeln!(out, "{}", line)
    }
}

/// Largest `alpha` with `X + alpha * d` PSD, given the Cholesky factor of
/// `X`. Returns `None` when the step is unbounded.
fn max_psd_step<T: Real>(lx: &CMat<T>, d: &CMat<T>) -> Result<Option<T>> {
    // lambda_min of Lx^{-1} d Lx^{-H}
    let y = solve_lower(lx, d);
    let s = solve_lower(lx, &y.adjoint()).adjoint().hermitian_part();
    let evd = hermitian_evd(&s)?;
    let lam_min = *evd.eigenvalues.last().expect("non-empty");
    if lam_min >= T::zero() {
        Ok(None)
    } else {
        Ok(Some(-T::one() / lam_min))
    }
}

/// Nesterov-Todd scaling point `W` with `W Z W = X`.
fn nt_scaling<T: Real>(lx: &CMat<T>, z: &CMat<T>) -> Result<CMat<T>> {
    let g = lx.adjoint().matmul(z).matmul(lx).hermitian_part();
    let evd = hermitian_evd(&g)?;
    let floor = T::of(1e-300);
    let g_inv_sqrt = evd.map_spectrum(|l| T::one() / l.max(floor).sqrt());
    Ok(lx.matmul(&g_inv_sqrt).matmul(&lx.adjoint()).hermitian_part())
}

struct Workspace<T> {
    c: CMat<T>,
    a: Vec<CMat<T>>,
    b: Vec<T>,
    n: usize,
}

impl<T: Real> Workspace<T> {
    /// `sum_i y_i A_i`
    fn combine(&self, y: &[T]) -> CMat<T> {
        let mut out = CMat::zeros(self.n, self.n);
        for (yi, ai) in y.iter().zip(&self.a) {
            out = out.axpy(*yi, ai);
        }
        out
    }

    /// `(<A_i, X>)_i`
    fn apply(&self, x: &CMat<T>) -> Vec<T> {
        self.a.iter().map(|ai| ai.trace_product_re(x)).collect()
    }
}

/// Solves a standard-form SDP to the requested KKT tolerance.
///
/// `status = Optimal` means primal feasibility, dual feasibility, and the
/// complementarity gap are all below `tol` (relative measures). Hitting
/// the iteration cap returns the best iterate with `status = MaxIter`;
/// detected divergence of the iterate sequence reports `Infeasible`.
pub fn solve_sdp<T: Real>(problem: &SdpProblem<T>, tol: T, max_iter: usize) -> Result<SdpSolution<T>> {
    problem.validate()?;
    let n = problem.dim();
    let m = problem.constraints.len();
    let flip = problem.sense == Sense::Minimize;

    let ws = Workspace {
        c: if flip {
            problem.objective.hermitian_part().scale(-T::one())
        } else {
            problem.objective.hermitian_part()
        },
        a: problem
            .constraints
            .iter()
            .map(|(a, _)| a.hermitian_part())
            .collect(),
        b: problem.constraints.iter().map(|&(_, b)| b).collect(),
        n,
    };

    // Constraint independence check through the Gram matrix of the A_i.
    {
        let mut gram = CMat::<T>::zeros(m, m);
        let mut max_diag = T::zero();
        for i in 0..m {
            for j in 0..m {
                let v = ws.a[i].trace_product_re(&ws.a[j]);
                gram[(i, j)] = Complex::new(v, T::zero());
                if i == j && v > max_diag {
                    max_diag = v;
                }
            }
        }
        match cholesky_with_threshold(&gram, max_diag * T::of(1e-10)) {
            Ok(_) => {}
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                return Err(Error::DependentConstraints { index, pivot })
            }
            Err(e) => return Err(e),
        }
    }

    // Interior start: X = c I with c from a least-squares fit of the
    // constraints, Z sized to dominate the objective, y = 0.
    let tr_a: Vec<T> = ws.a.iter().map(|a| a.trace().re).collect();
    let num: T = tr_a.iter().zip(&ws.b).map(|(&t, &b)| t * b).sum();
    let den: T = tr_a.iter().map(|&t| t * t).sum();
    let b_scale = ws.b.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let mut c0 = if den > T::zero() { num / den } else { T::one() };
    let floor = (T::one() + b_scale) * T::of(1e-3) / T::of(n as f64).max(T::one());
    if !(c0 > floor) {
        c0 = floor.max(T::of(1e-3));
    }
    let mut x = CMat::<T>::identity(n).scale(c0);
    let z0 = T::one() + ws.c.fro_norm();
    let mut z = CMat::<T>::identity(n).scale(z0);
    let mut y = vec![T::zero(); m];

    let c_norm = T::one() + ws.c.fro_norm();
    let diverge_limit = T::of(1e9) * (T::one() + b_scale + ws.c.fro_norm());

    let mut trace: Vec<SdpIterate<T>> = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;

    let nf = T::of(n as f64);
    let tau = T::of(0.98);

    let mut kkt = KktResiduals {
        primal: T::infinity(),
        dual: T::infinity(),
        gap: T::infinity(),
    };

    for iter in 0..max_iter {
        iterations = iter;

        // Residuals and objectives at the current iterate.
        let ax = ws.apply(&x);
        let rp: Vec<T> = ws.b.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let aty = ws.combine(&y);
        let rd = ws.c.add(&z).sub(&aty); // want A^T y = C + Z
        let pobj = ws.c.trace_product_re(&x);
        let dobj: T = ws.b.iter().zip(&y).map(|(&b, &yi)| b * yi).sum();
        let xz = x.trace_product_re(&z);
        let mu = xz / nf;

        let pres = rp
            .iter()
            .zip(&ws.b)
            .map(|(&r, &b)| r.abs() / (T::one() + b.abs()))
            .fold(T::zero(), T::max);
        let dres = rd.fro_norm() / c_norm;
        let obj_scale = T::one() + pobj.abs() + dobj.abs();
        let gap = (pobj - dobj).abs().max(xz.abs()) / obj_scale;

        trace.push(SdpIterate {
            primal_objective: pobj,
            dual_objective: dobj,
            xz_inner: xz,
            dual_residual_x: rd.trace_product_re(&x),
            primal_residual_y: rp.iter().zip(&y).map(|(&r, &yi)| r * yi).sum(),
            mu,
        });
        kkt = KktResiduals {
            primal: pres,
            dual: dres,
            gap,
        };

        if pres <= tol && dres <= tol && gap <= tol {
            status = SdpStatus::Optimal;
            break;
        }

        // Divergence heuristic for infeasible problems.
        let y_norm = y.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
        if y_norm > diverge_limit || x.fro_norm() > diverge_limit {
            status = SdpStatus::Infeasible;
            break;
        }

        // Numerical breakdown of the factorizations means the iterate hit
        // the cone boundary and cannot recover: an infeasible problem if
        // the constraints are still badly violated, a stall otherwise.
        let stalled = |pres: T| {
            if pres > tol * T::of(1e3) {
                SdpStatus::Infeasible
            } else {
                SdpStatus::MaxIter
            }
        };
        let lx = match cholesky(&x) {
            Ok(l) => l,
            Err(Error::NotPositiveDefinite { .. }) => {
                status = stalled(pres);
                break;
            }
            Err(e) => return Err(e),
        };
        let w = match nt_scaling(&lx, &z) {
            Ok(w) => w,
            Err(Error::NotPositiveDefinite { .. }) | Err(Error::NoConvergence { .. }) => {
                status = stalled(pres);
                break;
            }
            Err(e) => return Err(e),
        };
        let (z_inv, lz) = match (solve_hermitian(&z, &CMat::identity(n)), cholesky(&z)) {
            (Ok(zi), Ok(l)) => (zi.hermitian_part(), l),
            (Err(Error::NotPositiveDefinite { .. }), _) | (_, Err(Error::NotPositiveDefinite { .. })) => {
                status = stalled(pres);
                break;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };

        // Schur complement M[i][j] = <A_i, W A_j W>, shared by both solves.
        let wa: Vec<CMat<T>> = ws.a.iter().map(|ai| w.matmul(ai).matmul(&w)).collect();
        let mut schur = CMat::<T>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = ws.a[i].trace_product_re(&wa[j]);
                schur[(i, j)] = Complex::new(v, T::zero());
                schur[(j, i)] = Complex::new(v, T::zero());
            }
        }
        // True dependence was already caught by the Gram check, so a
        // Schur factorization failure here is scaling collapse.
        let schur_l = match cholesky(&schur) {
            Ok(l) => l,
            Err(Error::NotPositiveDefinite { .. }) => {
                status = stalled(pres);
                break;
            }
            Err(e) => return Err(e),
        };

        let solve_direction = |rc: &CMat<T>| -> (CMat<T>, Vec<T>, CMat<T>) {
            // M dy = A(rc) + A(W Rd W) - rp
            let w_rd_w = w.matmul(&rd).matmul(&w);
            let mut rhs = CMat::<T>::zeros(m, 1);
            for i in 0..m {
                let v = ws.a[i].trace_product_re(rc) + ws.a[i].trace_product_re(&w_rd_w) - rp[i];
                rhs[(i, 0)] = Complex::new(v, T::zero());
            }
            let dy_mat = crate::linalg::solve_lower_adjoint(&schur_l, &solve_lower(&schur_l, &rhs));
            let dy: Vec<T> = (0..m).map(|i| dy_mat[(i, 0)].re).collect();
            let dz = ws.combine(&dy).sub(&rd).hermitian_part();
            let dx = rc.sub(&w.matmul(&dz).matmul(&w)).hermitian_part();
            (dx, dy, dz)
        };

        // Predictor (affine scaling) step for the centering heuristic.
        let rc_aff = x.scale(-T::one());
        let (dx_aff, _dy_aff, dz_aff) = solve_direction(&rc_aff);
        let ap_aff = match max_psd_step(&lx, &dx_aff)? {
            Some(a) => a.min(T::one()),
            None => T::one(),
        };
        let ad_aff = match max_psd_step(&lz, &dz_aff)? {
            Some(a) => a.min(T::one()),
            None => T::one(),
        };
        let x_aff = x.axpy(ap_aff, &dx_aff);
        let z_aff = z.axpy(ad_aff, &dz_aff);
        let mu_aff = x_aff.trace_product_re(&z_aff) / nf;
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = (ratio * ratio * ratio).min(T::one()).max(T::of(1e-8));

        // Combined centering step.
        let rc = z_inv.scale(sigma * mu).sub(&x);
        let (dx, dy, dz) = solve_direction(&rc);
        let ap = match max_psd_step(&lx, &dx)? {
            Some(a) => (tau * a).min(T::one()),
            None => T::one(),
        };
        let ad = match max_psd_step(&lz, &dz)? {
            Some(a) => (tau * a).min(T::one()),
            None => T::one(),
        };

        x = x.axpy(ap, &dx).hermitian_part();
        z = z.axpy(ad, &dz).hermitian_part();
        for i in 0..m {
            y[i] += ad * dy[i];
        }
        iterations = iter + 1;
    }

    let objective_internal = ws.c.trace_product_re(&x);
    Ok(SdpSolution {
        x,
        dual: y,
        objective_value: if flip {
            -objective_internal
        } else {
            objective_internal
        },
        status,
        kkt,
        iterations,
        trace,
    })
}

/// Cholesky with an explicit absolute pivot threshold, used for rank
/// detection on Gram matrices.
fn cholesky_with_threshold<T: Real>(a: &CMat<T>, threshold: T) -> Result<CMat<T>> {
    let n = a.rows();
    let mut l = CMat::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[(i, j)];
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
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    type M = CMat<f64>;
    type C64 = Complex<f64>;

    fn solve(p: &SdpProblem<f64>) -> SdpSolution<f64> {
        solve_sdp(p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
    }

    #[test]
    fn trace_constraint_forces_objective() {
        // maximize tr(X) s.t. tr(X) = 1  ->  objective 1.
        let p = SdpProblem {
            objective: M::identity(3),
            constraints: vec![(M::identity(3), 1.0)],
            sense: Sense::Maximize,
        };
        let s = solve(&p);
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eigenvalue_selection() {
        // minimize tr(diag(1,2) X) s.t. tr(X) = 1  ->  objective 1, X = diag(1,0).
        let p = SdpProblem {
            objective: M::from_real_diag(&[1.0, 2.0]),
            constraints: vec![(M::identity(2), 1.0)],
            sense: Sense::Minimize,
        };
        let s = solve(&p);
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-6);
        assert!((s.x[(0, 0)].re - 1.0).abs() < 1e-5);
        assert!(s.x[(1, 1)].re.abs() < 1e-5);
    }

    #[test]
    fn solution_is_psd_and_feasible() {
        let mut a1 = M::zeros(3, 3);
        a1[(0, 0)] = C64::new(1.0, 0.0);
        a1[(1, 1)] = C64::new(2.0, 0.0);
        a1[(0, 1)] = C64::new(0.0, 0.5);
        a1[(1, 0)] = C64::new(0.0, -0.5);
        let p = SdpProblem {
            objective: M::from_real_diag(&[1.0, -1.0, 0.3]),
            constraints: vec![(M::identity(3), 2.0), (a1, 1.0)],
            sense: Sense::Maximize,
        };
        let s = solve(&p);
        assert_eq!(s.status, SdpStatus::Optimal);
        let evd = hermitian_evd(&s.x).unwrap();
        let lam_min = *evd.eigenvalues.last().unwrap();
        let lam_max = evd.eigenvalues[0];
        assert!(lam_min >= -1e-7 * (1.0 + lam_max));
        for (a, b) in &p.constraints {
            assert!((a.trace_product_re(&s.x) - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn deterministic_resolve() {
        let p = SdpProblem {
            objective: M::from_real_diag(&[1.0, 2.0, -0.5]),
            constraints: vec![(M::identity(3), 1.5)],
            sense: Sense::Maximize,
        };
        let s1 = solve(&p);
        let s2 = solve(&p);
        assert!((s1.objective_value - s2.objective_value).abs() < 1e-9);
    }

    #[test]
    fn infeasible_diagonal_constraint() {
        // X_00 = -1 with X PSD is infeasible.
        let mut a = M::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        let p = SdpProblem {
            objective: M::identity(2),
            constraints: vec![(a, -1.0), (M::identity(2), 1.0)],
            sense: Sense::Maximize,
        };
        let s = solve_sdp(&p, 1e-7, 200).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn dependent_constraints_rejected() {
        let p = SdpProblem {
            objective: M::identity(2),
            constraints: vec![(M::identity(2), 1.0), (M::identity(2).scale(2.0), 2.0)],
            sense: Sense::Maximize,
        };
        assert!(matches!(
            solve_sdp(&p, 1e-7, 100),
            Err(Error::DependentConstraints { .. })
        ));
    }

    #[test]
    fn dump_header_shape() {
        let p = SdpProblem {
            objective: M::identity(2),
            constraints: vec![(M::identity(2), 1.0)],
            sense: Sense::Maximize,
        };
        let mut buf = Vec::new();
        p.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sdp-problem v1\ndim 2\nconstraints 1\nsense max\nC\n"));
        assert!(text.contains("\nb\n"));
    }
}

//! Penalized fractional-programming mode selection.
//!
//! The connect/reflect assignment couples the binary diagonal `S` with
//! the ordered placement matrix; the equality tying them is moved into
//! the objective as a penalty `||S - S_a^H S_a||_F^2 / (2 rho)` and the
//! two blocks are optimized in alternation while `rho` shrinks
//! geometrically until the pair is consistent.
//!
//! Each block update is a quadratic-transform step (an auxiliary ratio
//! variable with a closed-form optimum) followed by a concave surrogate
//! of the remaining quadratic term, so the per-block problem collapses to
//! maximizing a linear function over the binary feasible set: a top-`a`
//! selection for the diagonal, an exact linear assignment for the
//! placement rows.

mod assignment;

pub use assignment::max_profit_assignment;

use num_complex::Complex;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cdot, hermitian_evd, max_eigenvalue, CMat, HermitianEvd};
use crate::model::{
    effective_channels_decoupled, selection_ratio, Beamformer, ModeSelection, ReflectCoefficients,
    SystemConfig,
};
use crate::scalar::Real;

/// Quadratic forms of the diagonal-selection subproblem at a fixed
/// placement; the homogenized selection vector is `[s; 1]`.
#[derive(Clone)]
pub struct SelectionData<T> {
    /// Per-element reflected amplitudes toward the user (length `N`).
    pub p_u: Vec<Complex<T>>,
    pub p_e: Vec<Complex<T>>,
    /// Selection-independent amplitude remainders.
    pub d_u: Complex<T>,
    pub d_e: Complex<T>,
    /// `(N+1)x(N+1)` Hermitian numerator/denominator forms.
    pub big_p_u: CMat<T>,
    pub big_p_e: CMat<T>,
    /// Real penalty vector: `[diag(I - 2 S_a^H S_a); tr(S_a^H S_a)]`.
    pub p_pen: Vec<T>,
    /// Cached factorization of the numerator form.
    pub evd_u: HermitianEvd<T>,
    /// Top eigenvalue of the denominator form.
    pub lambda_max_e: T,
}

fn homogenized<T: Real>(s: &[bool]) -> Vec<Complex<T>> {
    s.iter()
        .map(|&b| Complex::new(if b { T::one() } else { T::zero() }, T::zero()))
        .chain(std::iter::once(Complex::new(T::one(), T::zero())))
        .collect()
}

fn quad_form<T: Real>(m: &CMat<T>, v: &[Complex<T>]) -> T {
    cdot(v, &m.matvec(v)).re
}

/// Rank-two-plus-spike Hermitian form `u u^H / sigma2 + E_last`.
fn link_form<T: Real>(u: &[Complex<T>], sigma2: T) -> CMat<T> {
    let n = u.len();
    let mut m = CMat::outer(u, u).scale(T::one() / sigma2);
    m[(n - 1, n - 1)] += Complex::new(T::one(), T::zero());
    m
}

/// Builds the selection-subproblem data at the current placement.
pub fn build_s_data<T: Real>(
    ch: &ChannelSet<T>,
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
    placement: &[usize],
    cfg: &SystemConfig<T>,
) -> Result<SelectionData<T>> {
    let n = ch.n();
    if theta.theta.len() != n || beam.w_b.len() != ch.n_t() {
        return Err(Error::Dimension(
            "selection data: theta/beam do not match the channel dims".into(),
        ));
    }
    let g_beam = ch.g.adjoint_matvec(&beam.w_b); // G^H w_b, length N
    let p_u: Vec<Complex<T>> = (0..n)
        .map(|k| ch.h_ru[k].conj() * theta.theta[k] * g_beam[k])
        .collect();
    let p_e: Vec<Complex<T>> = (0..n)
        .map(|k| ch.h_re[k].conj() * theta.theta[k] * g_beam[k])
        .collect();

    let h_ur: Vec<Complex<T>> = placement.iter().map(|&p| ch.h_ru[p]).collect();
    let h_er: Vec<Complex<T>> = placement.iter().map(|&p| ch.h_re[p]).collect();
    let sum = |v: &[Complex<T>]| {
        v.iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
    };
    let d_u = cdot(&ch.h_bu, &beam.w_b) + sum(&p_u) + cdot(&h_ur, &beam.w_r);
    let d_e = cdot(&ch.h_be, &beam.w_b) + sum(&p_e) + cdot(&h_er, &beam.w_r);

    let stack = |p: &[Complex<T>], d: Complex<T>| {
        let mut v = p.to_vec();
        v.push(-d);
        v
    };
    let big_p_u = link_form(&stack(&p_u, d_u), cfg.sigma2_u);
    let big_p_e = link_form(&stack(&p_e, d_e), cfg.sigma2_e);

    let mut connected = vec![false; n];
    for &p in placement {
        connected[p] = true;
    }
    let mut p_pen: Vec<T> = connected
        .iter()
        .map(|&t| if t { -T::one() } else { T::one() })
        .collect();
    p_pen.push(T::of(placement.len() as f64));

    let evd_u = hermitian_evd(&big_p_u)?;
    let lambda_max_e = max_eigenvalue(&big_p_e)?;
    Ok(SelectionData {
        p_u,
        p_e,
        d_u,
        d_e,
        big_p_u,
        big_p_e,
        p_pen,
        evd_u,
        lambda_max_e,
    })
}

/// Exact subproblem objective at a binary selection: the homogenized
/// ratio minus the penalty `s~^H p / (2 rho)`.
pub fn selection_objective<T: Real>(data: &SelectionData<T>, s: &[bool], rho: T) -> T {
    let st = homogenized(s);
    let num = quad_form(&data.big_p_u, &st);
    let den = quad_form(&data.big_p_e, &st);
    let pen: T = data
        .p_pen
        .iter()
        .zip(st.iter())
        .map(|(&p, z)| p * z.re)
        .sum();
    num / den - pen / (T::of(2.0) * rho)
}

/// Closed-form optimum of the ratio's auxiliary variable at the current
/// selection: `beta = Lambda^{1/2} U^H s~ / (s~^H P_e s~)`.
pub fn quadratic_transform_beta<T: Real>(data: &SelectionData<T>, s: &[bool]) -> Vec<Complex<T>> {
    let st = homogenized(s);
    let den = quad_form(&data.big_p_e, &st);
    let proj = data.evd_u.eigenvectors.adjoint_matvec(&st);
    proj.iter()
        .zip(&data.evd_u.eigenvalues)
        .map(|(z, &lam)| z * (lam.max(T::zero()).sqrt() / den))
        .collect()
}

/// Objective after the quadratic transform, at an explicit auxiliary
/// variable: `2 Re(beta^H Lambda^{1/2} U^H s~) - (s~^H P_e s~) |beta|^2 -
/// s~^H p / (2 rho)`.
pub fn transformed_objective<T: Real>(
    data: &SelectionData<T>,
    s: &[bool],
    beta: &[Complex<T>],
    rho: T,
) -> T {
    let st = homogenized(s);
    let proj = data.evd_u.eigenvectors.adjoint_matvec(&st);
    let linear: Complex<T> = proj
        .iter()
        .zip(&data.evd_u.eigenvalues)
        .zip(beta)
        .map(|((z, &lam), b)| b.conj() * z * lam.max(T::zero()).sqrt())
        .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z);
    let den = quad_form(&data.big_p_e, &st);
    let bb: T = beta.iter().map(|b| b.norm_sqr()).sum();
    let pen: T = data
        .p_pen
        .iter()
        .zip(st.iter())
        .map(|(&p, z)| p * z.re)
        .sum();
    T::of(2.0) * linear.re - den * bb - pen / (T::of(2.0) * rho)
}

/// Linear coefficients of the concave surrogate around `s_t`:
/// `gamma = Re{ U Lambda^{1/2} beta + (lambda_max I - P_e) s~_t |beta|^2 -
/// p / (4 rho) }`, to be maximized as `2 gamma^T s~` plus
/// [`sca_constant`].
pub fn sca_linearize_s<T: Real>(
    data: &SelectionData<T>,
    s_t: &[bool],
    beta: &[Complex<T>],
    rho: T,
) -> Vec<T> {
    let st = homogenized(s_t);
    let dim = st.len();
    let bb: T = beta.iter().map(|b| b.norm_sqr()).sum();

    // U Lambda^{1/2} beta
    let scaled: Vec<Complex<T>> = beta
        .iter()
        .zip(&data.evd_u.eigenvalues)
        .map(|(b, &lam)| b * lam.max(T::zero()).sqrt())
        .collect();
    let term_fp = data.evd_u.eigenvectors.matvec(&scaled);

    // (lambda_max I - P_e) s~_t |beta|^2
    let pe_st = data.big_p_e.matvec(&st);
    (0..dim)
        .map(|i| {
            let majorizer = (st[i] * data.lambda_max_e - pe_st[i]) * bb;
            (term_fp[i] + majorizer).re - data.p_pen[i] / (T::of(4.0) * rho)
        })
        .collect()
}

/// Constant completing the surrogate: the surrogate value at any feasible
/// selection is `2 gamma^T s~ + sca_constant`.
pub fn sca_constant<T: Real>(data: &SelectionData<T>, s_t: &[bool], beta: &[Complex<T>]) -> T {
    let st = homogenized(s_t);
    let bb: T = beta.iter().map(|b| b.norm_sqr()).sum();
    let a_plus_1 = T::of(s_t.iter().filter(|&&b| b).count() as f64 + 1.0);
    let den_t = quad_form(&data.big_p_e, &st);
    -bb * (T::of(2.0) * data.lambda_max_e * a_plus_1 - den_t)
}

/// Maximizes the linear surrogate: connect the `a` elements with the
/// largest coefficients, ties to the lowest index. The homogenization
/// coordinate (last entry) is fixed and ignored.
pub fn update_s<T: Real>(gamma: &[T], a: usize) -> Vec<bool> {
    let n = gamma.len() - 1;
    assert!(a <= n, "cannot connect {a} of {n} elements");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        gamma[j]
            .partial_cmp(&gamma[i])
            .expect("finite selection coefficients")
            .then(i.cmp(&j))
    });
    let mut s = vec![false; n];
    for &i in order.iter().take(a) {
        s[i] = true;
    }
    s
}

/// Quadratic forms of the placement subproblem at a fixed diagonal; the
/// homogenized variable stacks `a` one-hot rows and a trailing one.
#[derive(Clone)]
pub struct PlacementData<T> {
    /// `(aN+1)`-dimensional Hermitian numerator/denominator forms.
    pub h_u: CMat<T>,
    pub h_e: CMat<T>,
    /// Diagonal of the (negative-semidefinite) penalty form: `-1/rho` on
    /// slots whose element is connected in `s`, zero elsewhere.
    pub m_diag: Vec<T>,
    /// Cached factorization of the numerator form.
    pub evd_u: HermitianEvd<T>,
    pub n: usize,
    pub a: usize,
}

fn placement_homogenized<T: Real>(placement: &[usize], n: usize) -> Vec<Complex<T>> {
    let a = placement.len();
    let mut z = vec![Complex::new(T::zero(), T::zero()); a * n + 1];
    for (i, &p) in placement.iter().enumerate() {
        z[i * n + p] = Complex::new(T::one(), T::zero());
    }
    z[a * n] = Complex::new(T::one(), T::zero());
    z
}

/// Builds the placement-subproblem data at the current diagonal.
pub fn build_sa_data<T: Real>(
    ch: &ChannelSet<T>,
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
    s: &[bool],
    rho: T,
    cfg: &SystemConfig<T>,
) -> Result<PlacementData<T>> {
    let n = ch.n();
    let a = beam.w_r.len();
    if a == 0 {
        return Err(Error::InvalidConfig(
            "placement subproblem does not exist without connected elements".into(),
        ));
    }
    if !(rho > T::zero()) {
        return Err(Error::InvalidConfig("penalty factor must be positive".into()));
    }

    // Reflection-side effective channels at the given diagonal; the
    // placement enters only through the connected rows.
    let eff = effective_channels_decoupled(ch, s, &[], theta);
    let amp_u = cdot(&eff.h_ub, &beam.w_b);
    let amp_e = cdot(&eff.h_eb, &beam.w_b);

    let kron = |h: &[Complex<T>], tail: Complex<T>| {
        let mut v = Vec::with_capacity(a * n + 1);
        for wr in &beam.w_r {
            for hk in h {
                v.push(*wr * hk.conj());
            }
        }
        v.push(tail);
        v
    };
    let h_u = link_form(&kron(&ch.h_ru, amp_u), cfg.sigma2_u);
    let h_e = link_form(&kron(&ch.h_re, amp_e), cfg.sigma2_e);

    let mut m_diag = Vec::with_capacity(a * n + 1);
    for _ in 0..a {
        for &flag in s {
            m_diag.push(if flag { -T::one() / rho } else { T::zero() });
        }
    }
    m_diag.push(T::zero());

    let evd_u = hermitian_evd(&h_u)?;
    Ok(PlacementData {
        h_u,
        h_e,
        m_diag,
        evd_u,
        n,
        a,
    })
}

/// Exact placement objective `z~^H H_u z~ / z~^H H_e z~ - z~^H M z~`.
pub fn placement_objective<T: Real>(data: &PlacementData<T>, placement: &[usize]) -> T {
    let z = placement_homogenized(placement, data.n);
    let num = quad_form(&data.h_u, &z);
    let den = quad_form(&data.h_e, &z);
    let pen: T = z
        .iter()
        .zip(&data.m_diag)
        .map(|(zi, &m)| zi.norm_sqr() * m)
        .sum();
    num / den - pen
}

/// Auxiliary ratio variable for the placement block, mirror of
/// [`quadratic_transform_beta`].
pub fn fp_eta<T: Real>(data: &PlacementData<T>, placement: &[usize]) -> Vec<Complex<T>> {
    let z = placement_homogenized(placement, data.n);
    let den = quad_form(&data.h_e, &z);
    let proj = data.evd_u.eigenvectors.adjoint_matvec(&z);
    proj.iter()
        .zip(&data.evd_u.eigenvalues)
        .map(|(p, &lam)| p * (lam.max(T::zero()).sqrt() / den))
        .collect()
}

/// Linear coefficients of the placement surrogate around `z_t`:
/// real part of `U Lambda^{1/2} eta + (mu_max I - H_e |eta|^2 - M) z~_t`.
pub fn sa_linearize<T: Real>(
    data: &PlacementData<T>,
    placement_t: &[usize],
    eta: &[Complex<T>],
) -> Result<Vec<T>> {
    let z = placement_homogenized::<T>(placement_t, data.n);
    let ee: T = eta.iter().map(|x| x.norm_sqr()).sum();

    // mu_max of the combined quadratic H_e |eta|^2 + M.
    let mut combined = data.h_e.scale(ee);
    for (i, &m) in data.m_diag.iter().enumerate() {
        combined[(i, i)] += Complex::new(m, T::zero());
    }
    let mu_max = max_eigenvalue(&combined)?;

    let scaled: Vec<Complex<T>> = eta
        .iter()
        .zip(&data.evd_u.eigenvalues)
        .map(|(e, &lam)| e * lam.max(T::zero()).sqrt())
        .collect();
    let term_fp = data.evd_u.eigenvectors.matvec(&scaled);
    let he_z = data.h_e.matvec(&z);
    Ok((0..z.len())
        .map(|i| {
            let majorizer = z[i] * mu_max - he_z[i] * ee - z[i] * data.m_diag[i];
            (term_fp[i] + majorizer).re
        })
        .collect())
}

/// Maximizes the placement surrogate exactly: an `a x N` assignment over
/// the per-slot blocks of the linear coefficients.
pub fn update_sa<T: Real>(data: &PlacementData<T>, epsilon: &[T]) -> Result<Vec<usize>> {
    if data.a > data.n {
        return Err(Error::InvalidConfig(format!(
            "cannot place {} connected elements on {} slots",
            data.a, data.n
        )));
    }
    let profit: Vec<Vec<T>> = (0..data.a)
        .map(|i| epsilon[i * data.n..(i + 1) * data.n].to_vec())
        .collect();
    Ok(max_profit_assignment(&profit))
}

/// Options of the penalty loop.
#[derive(Clone, Copy, Debug)]
pub struct ModeSelOpts<T> {
    /// Initial penalty factor.
    pub rho0: T,
    /// Geometric shrink factor per outer pass, in (0, 1).
    pub shrink: T,
    /// Consistency threshold on the Frobenius residual.
    pub epsilon: T,
    /// Cap on penalty passes.
    pub max_passes: usize,
    /// Cap on inner ratio-update iterations per block and pass.
    pub fp_max_iters: usize,
    /// Inner stop once the block objective improves less than this.
    pub fp_tol: T,
}

impl<T: Real> Default for ModeSelOpts<T> {
    fn default() -> Self {
        Self {
            rho0: T::of(1e6),
            shrink: T::of(0.5),
            epsilon: T::of(1e-3),
            max_passes: 30,
            fp_max_iters: 20,
            fp_tol: T::of(1e-6),
        }
    }
}

/// One penalty pass record.
#[derive(Clone, Copy, Debug)]
pub struct PenaltyState<T> {
    /// Penalty factor used during the pass.
    pub rho: T,
    /// `||S - S_a^H S_a||_F` after the pass.
    pub residual: T,
    /// Ratio-update iterations spent in the pass (both blocks).
    pub inner_iter: usize,
}

/// Result of the penalty loop.
#[derive(Clone, Debug)]
pub struct ModeSelectionOutcome<T> {
    pub mode: ModeSelection,
    pub trace: Vec<PenaltyState<T>>,
    /// False when the pass cap was hit and the returned selection was
    /// forced consistent from the best iterate.
    pub converged: bool,
}

/// Alternates diagonal and placement updates under a shrinking penalty
/// until the pair is exactly consistent. The returned selection is
/// always consistent; when the pass cap is hit first, the best
/// consistent candidate seen (or forced from the final iterate) is
/// returned with `converged = false`.
pub fn solve_mode_selection<T: Real>(
    ch: &ChannelSet<T>,
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
    cfg: &SystemConfig<T>,
    init: &ModeSelection,
    opts: &ModeSelOpts<T>,
) -> Result<ModeSelectionOutcome<T>> {
    cfg.validate()?;
    init.validate(cfg)?;
    if beam.w_b.len() != cfg.n_t || beam.w_r.len() != cfg.a {
        return Err(Error::Dimension(format!(
            "beamformer lengths {}/{} do not match n_t={}, a={}",
            beam.w_b.len(),
            beam.w_r.len(),
            cfg.n_t,
            cfg.a
        )));
    }
    if !(opts.rho0 > T::zero()) {
        return Err(Error::InvalidConfig("rho0 must be positive".into()));
    }
    if !(opts.shrink > T::zero() && opts.shrink < T::one()) {
        return Err(Error::InvalidConfig("shrink factor must lie in (0,1)".into()));
    }
    if !(opts.epsilon > T::zero()) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }

    if cfg.a == 0 {
        return Ok(ModeSelectionOutcome {
            mode: ModeSelection::first_connected(cfg.n, 0),
            trace: Vec::new(),
            converged: true,
        });
    }

    let mut s = init.s.clone();
    let mut placement = init.placement.clone();
    let mut rho = opts.rho0;
    let mut trace = Vec::new();
    let mut converged = false;

    let ratio_of = |s: &[bool], placement: &[usize]| -> T {
        selection_ratio(ch, s, placement, theta, beam, cfg)
    };
    let mut best: Option<(ModeSelection, T)> = None;
    let consider = |s: &[bool], placement: &[usize], best: &mut Option<(ModeSelection, T)>| {
        let cand = ModeSelection {
            s: s.to_vec(),
            placement: placement.to_vec(),
        };
        if cand.is_consistent() && cand.connected_count() == cfg.a {
            let r = ratio_of(s, placement);
            if best.as_ref().map_or(true, |(_, b)| r > *b) {
                *best = Some((cand, r));
            }
        }
    };
    consider(&s, &placement, &mut best);

    for _pass in 0..opts.max_passes {
        let mut inner_iter = 0;

        // Diagonal update at fixed placement.
        let data_s = build_s_data(ch, theta, beam, &placement, cfg)?;
        let mut obj = selection_objective(&data_s, &s, rho);
        for _ in 0..opts.fp_max_iters {
            let beta = quadratic_transform_beta(&data_s, &s);
            let gamma = sca_linearize_s(&data_s, &s, &beta, rho);
            let s_new = update_s(&gamma, cfg.a);
            let obj_new = selection_objective(&data_s, &s_new, rho);
            debug_assert!(
                obj_new >= obj - T::of(1e-9) * (T::one() + obj.abs()),
                "selection pass decreased the penalized objective"
            );
            s = s_new;
            inner_iter += 1;
            let improved = obj_new - obj;
            obj = obj_new;
            if improved < opts.fp_tol {
                break;
            }
        }

        // Placement update at fixed diagonal.
        let data_z = build_sa_data(ch, theta, beam, &s, rho, cfg)?;
        let mut obj_z = placement_objective(&data_z, &placement);
        for _ in 0..opts.fp_max_iters {
            let eta = fp_eta(&data_z, &placement);
            let eps = sa_linearize(&data_z, &placement, &eta)?;
            let placement_new = update_sa(&data_z, &eps)?;
            let obj_new = placement_objective(&data_z, &placement_new);
            debug_assert!(
                obj_new >= obj_z - T::of(1e-9) * (T::one() + obj_z.abs()),
                "placement pass decreased the penalized objective"
            );
            placement = placement_new;
            inner_iter += 1;
            let improved = obj_new - obj_z;
            obj_z = obj_new;
            if improved < opts.fp_tol {
                break;
            }
        }

        let mode_now = ModeSelection {
            s: s.clone(),
            placement: placement.clone(),
        };
        let residual = T::of(mode_now.mismatch_count() as f64).sqrt();
        consider(&s, &placement, &mut best);
        trace.push(PenaltyState {
            rho,
            residual,
            inner_iter,
        });
        rho = rho * opts.shrink;
        if residual <= opts.epsilon {
            converged = true;
            break;
        }
    }

    let mode = if converged {
        ModeSelection {
            s: s.clone(),
            placement: placement.clone(),
        }
    } else {
        // Force consistency from the better of the two one-sided
        // projections, also competing with the best candidate seen.
        let from_s = ModeSelection {
            s: s.clone(),
            placement: (0..cfg.n).filter(|&i| s[i]).collect(),
        };
        consider(&from_s.s, &from_s.placement, &mut best);
        let from_placement = ModeSelection::from_placement(cfg.n, placement.clone());
        if from_placement.connected_count() == cfg.a {
            consider(&from_placement.s, &from_placement.placement, &mut best);
        }
        best.as_ref().expect("at least the initial candidate").0.clone()
    };
    debug_assert!(mode.is_consistent());

    Ok(ModeSelectionOutcome {
        mode,
        trace,
        converged,
    })
}

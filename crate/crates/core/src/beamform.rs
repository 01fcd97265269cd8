//! Closed-form active beamforming.
//!
//! With everything else fixed, the stacked transmit vector solves a
//! generalized Rayleigh-quotient problem: maximize
//! `(w^H R_u w + 1) / (w^H R_e w + 1)` under the power budget, where
//! `R_u`/`R_e` are rank-one link outer products. Substituting
//! `w = sqrt(P) u` with a unit vector turns both `+1` offsets into
//! `1/P` diagonal loadings, so the maximizer is the top generalized
//! eigenvector of the loaded pencil, taken at full power.

use num_complex::Complex;

use crate::error::Result;
use crate::linalg::{cholesky, hermitian_evd, solve_lower, solve_lower_adjoint, CMat};
use crate::model::{Beamformer, EffectiveChannels, SystemConfig};
use crate::scalar::Real;

/// Diagonal loading used in the pencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KappaRule {
    /// `kappa = 1/P`: the algebraically consistent reduction of the
    /// budgeted quotient. Default.
    #[default]
    InversePower,
    /// `kappa = 1/sqrt(P)`: kept selectable for comparison runs.
    InverseSqrtPower,
}

/// Quadratic forms of the beamforming subproblem.
#[derive(Clone, Debug)]
pub struct RayleighData<T> {
    /// `(h_u h_u^H) / sigma_u^2` over the stacked channel `[h_ub; h_ur]`.
    pub r_u: CMat<T>,
    pub r_e: CMat<T>,
    /// Power budget.
    pub power: T,
    /// Split point between base-station and connected-element entries.
    pub n_t: usize,
}

/// Builds the rank-one quadratic forms from the effective channels.
pub fn build_rayleigh<T: Real>(eff: &EffectiveChannels<T>, cfg: &SystemConfig<T>) -> RayleighData<T> {
    let mut stacked_u = eff.h_ub.clone();
    stacked_u.extend_from_slice(&eff.h_ur);
    let mut stacked_e = eff.h_eb.clone();
    stacked_e.extend_from_slice(&eff.h_er);
    RayleighData {
        r_u: CMat::outer(&stacked_u, &stacked_u).scale(T::one() / cfg.sigma2_u),
        r_e: CMat::outer(&stacked_e, &stacked_e).scale(T::one() / cfg.sigma2_e),
        power: cfg.power,
        n_t: cfg.n_t,
    }
}

/// The quotient `(w^H R_u w + 1) / (w^H R_e w + 1)` at a stacked vector.
pub fn quotient<T: Real>(data: &RayleighData<T>, w: &[Complex<T>]) -> T {
    let wu = data.r_u.matvec(w);
    let we = data.r_e.matvec(w);
    let num = crate::linalg::cdot(w, &wu).re + T::one();
    let den = crate::linalg::cdot(w, &we).re + T::one();
    num / den
}

/// Full-power maximizer of the quotient, phase-normalized so the first
/// non-negligible entry is real positive.
pub fn optimal_beamformer<T: Real>(data: &RayleighData<T>, rule: KappaRule) -> Result<Beamformer<T>> {
    let dim = data.r_u.rows();
    let kappa = match rule {
        KappaRule::InversePower => T::one() / data.power,
        KappaRule::InverseSqrtPower => T::one() / data.power.sqrt(),
    };

    // Whitened Hermitian pencil: (R_e + kI) = L L^H, then eigenvectors of
    // L^{-1}(R_u + kI)L^{-H} pull back through L^{-H}.
    let loaded_e = data.r_e.add(&CMat::identity(dim).scale(kappa));
    let loaded_u = data.r_u.add(&CMat::identity(dim).scale(kappa));
    let l = cholesky(&loaded_e)?;
    let half = solve_lower(&l, &loaded_u);
    let whitened = solve_lower(&l, &half.adjoint()).adjoint().hermitian_part();
    let evd = hermitian_evd(&whitened)?;
    let top = CMat::col_from(&evd.eigenvectors.col_vec(0));
    let mut u = solve_lower_adjoint(&l, &top).col_vec(0);

    // Exact power and canonical phase.
    let nrm = crate::linalg::norm(&u);
    let scale = data.power.sqrt() / nrm;
    for z in &mut u {
        *z = *z * scale;
    }
    let peak = u.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if let Some(first) = u.iter().find(|z| z.norm() > T::of(1e-12) * peak) {
        let rot = first.conj() / first.norm();
        for z in &mut u {
            *z = *z * rot;
        }
    }

    let w_r = u.split_off(data.n_t);
    Ok(Beamformer { w_b: u, w_r })
}

//! System configuration, effective channels, rates, and the penalized
//! objective — the shared evaluation core every solver calls.
//!
//! The mode-selection matrix is kept as its diagonal (one flag per
//! element) together with the ordered placement list of connected
//! elements; dense selection matrices exist only inside test oracles.

use num_complex::Complex;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cdot, norm_sq, zeros_vec};
use crate::scalar::Real;

/// Static system parameters. Powers and noise variances are linear watts.
#[derive(Clone, Copy, Debug)]
pub struct SystemConfig<T> {
    /// Base-station antennas.
    pub n_t: usize,
    /// Surface elements.
    pub n: usize,
    /// Elements in connection mode.
    pub a: usize,
    /// Transmit power budget.
    pub power: T,
    pub sigma2_u: T,
    pub sigma2_e: T,
    /// Carried for configuration parity; the signal model consumes no
    /// auxiliary noise term.
    pub sigma2_a: T,
}

impl<T: Real> SystemConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 1 {
            return Err(Error::InvalidConfig("n_t must be at least 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.a > self.n {
            return Err(Error::InvalidConfig(format!(
                "a = {} exceeds n = {}",
                self.a, self.n
            )));
        }
        if !(self.power > T::zero()) {
            return Err(Error::InvalidConfig("power must be positive".into()));
        }
        for (name, v) in [
            ("sigma2_u", self.sigma2_u),
            ("sigma2_e", self.sigma2_e),
            ("sigma2_a", self.sigma2_a),
        ] {
            if !(v > T::zero()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Number of reflecting elements.
    pub fn n_reflect(&self) -> usize {
        self.n - self.a
    }
}

/// Connect/reflect assignment: the binary diagonal plus the ordered list
/// of connected elements (row order of the placement matrix).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSelection {
    /// `s[n] = true` when element `n` is in connection mode.
    pub s: Vec<bool>,
    /// Ordered, distinct indices of connected elements.
    pub placement: Vec<usize>,
}

impl ModeSelection {
    /// Connects the `a` lowest-indexed elements.
    pub fn first_connected(n: usize, a: usize) -> Self {
        let mut s = vec![false; n];
        for flag in s.iter_mut().take(a) {
            *flag = true;
        }
        Self {
            s,
            placement: (0..a).collect(),
        }
    }

    /// Derives the diagonal from a placement list.
    pub fn from_placement(n: usize, placement: Vec<usize>) -> Self {
        let mut s = vec![false; n];
        for &p in &placement {
            s[p] = true;
        }
        Self { s, placement }
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn connected_count(&self) -> usize {
        self.s.iter().filter(|&&b| b).count()
    }

    /// Whether the placement rows reproduce exactly the diagonal:
    /// distinct rows whose index set equals the support of `s`.
    pub fn is_consistent(&self) -> bool {
        let mut seen = vec![false; self.s.len()];
        for &p in &self.placement {
            if p >= self.s.len() || seen[p] || !self.s[p] {
                return false;
            }
            seen[p] = true;
        }
        self.connected_count() == self.placement.len()
    }

    /// Number of diagonal positions where `S` and the placement-induced
    /// selector disagree; the Frobenius residual between them is its
    /// square root.
    pub fn mismatch_count(&self) -> usize {
        let mut t = vec![false; self.s.len()];
        for &p in &self.placement {
            if p < t.len() {
                t[p] = true;
            }
        }
        self.s.iter().zip(&t).filter(|(a, b)| a != b).count()
    }

    pub fn validate<T: Real>(&self, cfg: &SystemConfig<T>) -> Result<()> {
        if self.s.len() != cfg.n {
            return Err(Error::InconsistentMode(format!(
                "diagonal has length {}, expected {}",
                self.s.len(),
                cfg.n
            )));
        }
        if self.placement.len() != cfg.a {
            return Err(Error::InconsistentMode(format!(
                "placement has {} entries, expected {}",
                self.placement.len(),
                cfg.a
            )));
        }
        if self.connected_count() != cfg.a {
            return Err(Error::InconsistentMode(format!(
                "diagonal selects {} elements, expected {}",
                self.connected_count(),
                cfg.a
            )));
        }
        if !self.is_consistent() {
            return Err(Error::InconsistentMode(
                "placement does not match the diagonal support".into(),
            ));
        }
        Ok(())
    }
}

/// Unit-modulus reflection phases, one per surface element.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectCoefficients<T> {
    pub theta: Vec<Complex<T>>,
}

impl<T: Real> ReflectCoefficients<T> {
    pub fn all_ones(n: usize) -> Self {
        Self {
            theta: vec![Complex::new(T::one(), T::zero()); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.theta.iter().enumerate() {
            if (t.norm() - T::one()).abs() > T::of(1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "reflection coefficient {} has modulus {}",
                    i,
                    t.norm()
                )));
            }
        }
        Ok(())
    }
}

/// Transmit beamformers: `w_b` at the base station, `w_r` on the
/// connected elements, under a shared power budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer<T> {
    pub w_b: Vec<Complex<T>>,
    pub w_r: Vec<Complex<T>>,
}

impl<T: Real> Beamformer<T> {
    pub fn zero(n_t: usize, a: usize) -> Self {
        Self {
            w_b: zeros_vec(n_t),
            w_r: zeros_vec(a),
        }
    }

    pub fn power(&self) -> T {
        norm_sq(&self.w_b) + norm_sq(&self.w_r)
    }

    pub fn validate(&self, cfg: &SystemConfig<T>) -> Result<()> {
        if self.w_b.len() != cfg.n_t || self.w_r.len() != cfg.a {
            return Err(Error::Dimension(format!(
                "beamformer has lengths {}/{}, expected {}/{}",
                self.w_b.len(),
                self.w_r.len(),
                cfg.n_t,
                cfg.a
            )));
        }
        let p = self.power();
        if p > cfg.power + T::of(1e-9) * (T::one() + cfg.power) {
            return Err(Error::InvalidConfig(format!(
                "beamformer power {} exceeds budget {}",
                p, cfg.power
            )));
        }
        Ok(())
    }
}

/// Channels after applying the surface configuration: the base-station
/// paths fold in the reflected component, the connected rows are selected
/// in placement order.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels<T> {
    pub h_ub: Vec<Complex<T>>,
    pub h_ur: Vec<Complex<T>>,
    pub h_eb: Vec<Complex<T>>,
    pub h_er: Vec<Complex<T>>,
}

/// Effective channels without requiring a consistent pair: the reflection
/// mask comes from `s`, the connected rows from `placement`. The
/// penalized mode-selection subproblem evaluates exactly this.
pub(crate) fn effective_channels_decoupled<T: Real>(
    ch: &ChannelSet<T>,
    s: &[bool],
    placement: &[usize],
    theta: &ReflectCoefficients<T>,
) -> EffectiveChannels<T> {
    let n_t = ch.n_t();
    let n = ch.n();
    assert_eq!(s.len(), n, "selection length");
    assert_eq!(theta.theta.len(), n, "reflection length");

    // Masked reflected component per surface element.
    let refl_u: Vec<Complex<T>> = (0..n)
        .map(|k| {
            if s[k] {
                Complex::new(T::zero(), T::zero())
            } else {
                theta.theta[k].conj() * ch.h_ru[k]
            }
        })
        .collect();
    let refl_e: Vec<Complex<T>> = (0..n)
        .map(|k| {
            if s[k] {
                Complex::new(T::zero(), T::zero())
            } else {
                theta.theta[k].conj() * ch.h_re[k]
            }
        })
        .collect();

    let mut h_ub = ch.h_bu.clone();
    let mut h_eb = ch.h_be.clone();
    for i in 0..n_t {
        let mut acc_u = Complex::new(T::zero(), T::zero());
        let mut acc_e = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            let gik = ch.g[(i, k)];
            acc_u += gik * refl_u[k];
            acc_e += gik * refl_e[k];
        }
        h_ub[i] += acc_u;
        h_eb[i] += acc_e;
    }

    let h_ur: Vec<Complex<T>> = placement.iter().map(|&p| ch.h_ru[p]).collect();
    let h_er: Vec<Complex<T>> = placement.iter().map(|&p| ch.h_re[p]).collect();

    EffectiveChannels {
        h_ub,
        h_ur,
        h_eb,
        h_er,
    }
}

/// Effective channels for a consistent mode selection.
pub fn effective_channels<T: Real>(
    ch: &ChannelSet<T>,
    mode: &ModeSelection,
    theta: &ReflectCoefficients<T>,
) -> Result<EffectiveChannels<T>> {
    if !mode.is_consistent() {
        return Err(Error::InconsistentMode(
            "effective channels need a consistent selection".into(),
        ));
    }
    if mode.s.len() != ch.n() || theta.theta.len() != ch.n() {
        return Err(Error::Dimension(format!(
            "mode/theta have lengths {}/{}, channels have N = {}",
            mode.s.len(),
            theta.theta.len(),
            ch.n()
        )));
    }
    Ok(effective_channels_decoupled(
        ch,
        &mode.s,
        &mode.placement,
        theta,
    ))
}

/// Achievable and secrecy rates in bits/s/Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates<T> {
    pub r_u: T,
    pub r_e: T,
    pub r_s: T,
}

/// Received signal amplitude at the user, `h_ub^H w_b + h_ur^H w_r`.
pub(crate) fn rx_amplitude_user<T: Real>(
    eff: &EffectiveChannels<T>,
    beam: &Beamformer<T>,
) -> Complex<T> {
    cdot(&eff.h_ub, &beam.w_b) + cdot(&eff.h_ur, &beam.w_r)
}

pub(crate) fn rx_amplitude_eve<T: Real>(
    eff: &EffectiveChannels<T>,
    beam: &Beamformer<T>,
) -> Complex<T> {
    cdot(&eff.h_eb, &beam.w_b) + cdot(&eff.h_er, &beam.w_r)
}

/// Signal-to-noise ratios of the two links.
pub fn snrs<T: Real>(eff: &EffectiveChannels<T>, beam: &Beamformer<T>, cfg: &SystemConfig<T>) -> (T, T) {
    let snr_u = rx_amplitude_user(eff, beam).norm_sqr() / cfg.sigma2_u;
    let snr_e = rx_amplitude_eve(eff, beam).norm_sqr() / cfg.sigma2_e;
    (snr_u, snr_e)
}

/// User rate, eavesdropper rate, and their clamped difference.
/// Logarithms are evaluated in natural base and rescaled.
pub fn rates<T: Real>(eff: &EffectiveChannels<T>, beam: &Beamformer<T>, cfg: &SystemConfig<T>) -> Rates<T> {
    let (snr_u, snr_e) = snrs(eff, beam, cfg);
    let ln2 = T::of(std::f64::consts::LN_2);
    let r_u = snr_u.ln_1p() / ln2;
    let r_e = snr_e.ln_1p() / ln2;
    Rates {
        r_u,
        r_e,
        r_s: (r_u - r_e).max(T::zero()),
    }
}

/// Ratio `(1 + SNR_u) / (1 + SNR_e)` at a possibly inconsistent
/// `(s, placement)` pair; the secrecy rate is its base-2 logarithm
/// clamped at zero.
pub fn selection_ratio<T: Real>(
    ch: &ChannelSet<T>,
    s: &[bool],
    placement: &[usize],
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
    cfg: &SystemConfig<T>,
) -> T {
    let eff = effective_channels_decoupled(ch, s, placement, theta);
    let (snr_u, snr_e) = snrs(&eff, beam, cfg);
    (T::one() + snr_u) / (T::one() + snr_e)
}

/// Penalized mode-selection objective: the link ratio minus
/// `||S - S_a^H S_a||_F^2 / (2 rho)`.
pub fn penalty_objective<T: Real>(
    ch: &ChannelSet<T>,
    s: &[bool],
    placement: &[usize],
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
    cfg: &SystemConfig<T>,
    rho: T,
) -> Result<T> {
    if !(rho > T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "penalty factor must be positive, got {rho}"
        )));
    }
    let ratio = selection_ratio(ch, s, placement, theta, beam, cfg);
    let mode = ModeSelection {
        s: s.to_vec(),
        placement: placement.to_vec(),
    };
    let residual_sq = T::of(mode.mismatch_count() as f64);
    Ok(ratio - residual_sq / (T::of(2.0) * rho))
}

/// Full feasibility audit of a candidate solution: power budget,
/// unit-modulus phases, binary/cardinality selection, and
/// placement/diagonal consistency.
pub fn audit_solution<T: Real>(
    cfg: &SystemConfig<T>,
    mode: &ModeSelection,
    theta: &ReflectCoefficients<T>,
    beam: &Beamformer<T>,
) -> Result<()> {
    cfg.validate()?;
    mode.validate(cfg)?;
    if theta.theta.len() != cfg.n {
        return Err(Error::Dimension(format!(
            "theta has length {}, expected {}",
            theta.theta.len(),
            cfg.n
        )));
    }
    theta.validate()?;
    beam.validate(cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, Geometry, PathLossModel};
    use crate::linalg::CMat;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C64 = Complex<f64>;

    fn cfg(n_t: usize, n: usize, a: usize) -> SystemConfig<f64> {
        SystemConfig {
            n_t,
            n,
            a,
            power: 1.0,
            sigma2_u: 1.0,
            sigma2_e: 1.0,
            sigma2_a: 1.0,
        }
    }

    fn random_channels(n_t: usize, n: usize, seed: u64) -> ChannelSet<f64> {
        // Unit-scale channels keep identity tests scale-free.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        ChannelSet {
            g: CMat::from_fn(n_t, n, |_, _| draw()),
            h_bu: (0..n_t).map(|_| draw()).collect(),
            h_be: (0..n_t).map(|_| draw()).collect(),
            h_ru: (0..n).map(|_| draw()).collect(),
            h_re: (0..n).map(|_| draw()).collect(),
        }
    }

    fn random_theta(n: usize, seed: u64) -> ReflectCoefficients<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ReflectCoefficients {
            theta: (0..n)
                .map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                .collect(),
        }
    }

    fn random_beam(n_t: usize, a: usize, seed: u64) -> Beamformer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let w_b: Vec<C64> = (0..n_t).map(|_| draw()).collect();
        let w_r: Vec<C64> = (0..a).map(|_| draw()).collect();
        // Normalize into the unit power budget.
        let p = norm_sq(&w_b) + norm_sq(&w_r);
        let scale = (0.9 / p).sqrt();
        Beamformer {
            w_b: w_b.iter().map(|z| z * scale).collect(),
            w_r: w_r.iter().map(|z| z * scale).collect(),
        }
    }

    /// Dense-matrix oracle for the effective channels.
    fn effective_oracle(
        ch: &ChannelSet<f64>,
        mode: &ModeSelection,
        theta: &ReflectCoefficients<f64>,
    ) -> EffectiveChannels<f64> {
        let n = ch.n();
        let a = mode.placement.len();
        let s_diag = CMat::from_fn(n, n, |i, j| {
            if i == j && mode.s[i] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let theta_m = CMat::from_diag(&theta.theta);
        let i_minus_s = CMat::identity(n).sub(&s_diag);
        let sa = CMat::from_fn(a, n, |i, j| {
            if mode.placement[i] == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let refl = ch
            .g
            .matmul(&theta_m.adjoint())
            .matmul(&i_minus_s);
        EffectiveChannels {
            h_ub: refl
                .matvec(&ch.h_ru)
                .iter()
                .zip(&ch.h_bu)
                .map(|(r, d)| r + d)
                .collect(),
            h_ur: sa.matvec(&ch.h_ru),
            h_eb: refl
                .matvec(&ch.h_re)
                .iter()
                .zip(&ch.h_be)
                .map(|(r, d)| r + d)
                .collect(),
            h_er: sa.matvec(&ch.h_re),
        }
    }

    #[test]
    fn all_connected_removes_reflection() {
        let ch = random_channels(3, 4, 1);
        let mode = ModeSelection::first_connected(4, 4);
        let theta = random_theta(4, 2);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        assert_eq!(eff.h_ub, ch.h_bu);
        assert_eq!(eff.h_eb, ch.h_be);
        assert_eq!(eff.h_ur.len(), 4);
    }

    #[test]
    fn no_connected_elements_is_pure_reflection() {
        let ch = random_channels(3, 4, 3);
        let mode = ModeSelection::first_connected(4, 0);
        let theta = random_theta(4, 4);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        assert!(eff.h_ur.is_empty());
        let oracle = effective_oracle(&ch, &mode, &theta);
        for (x, y) in eff.h_ub.iter().zip(&oracle.h_ub) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_product_oracle() {
        let ch = random_channels(3, 4, 5);
        let mode = ModeSelection::from_placement(4, vec![2, 0]);
        let theta = random_theta(4, 6);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let oracle = effective_oracle(&ch, &mode, &theta);
        for (x, y) in eff
            .h_ub
            .iter()
            .chain(&eff.h_ur)
            .chain(&eff.h_eb)
            .chain(&eff.h_er)
            .zip(oracle.h_ub.iter().chain(&oracle.h_ur).chain(&oracle.h_eb).chain(&oracle.h_er))
        {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_mode_rejected() {
        let ch = random_channels(2, 3, 7);
        let mode = ModeSelection {
            s: vec![true, false, false],
            placement: vec![1],
        };
        let theta = ReflectCoefficients::all_ones(3);
        assert!(matches!(
            effective_channels(&ch, &mode, &theta),
            Err(Error::InconsistentMode(_))
        ));
    }

    #[test]
    fn zero_beam_gives_zero_rates() {
        let ch = random_channels(3, 4, 8);
        let mode = ModeSelection::first_connected(4, 2);
        let theta = random_theta(4, 9);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let c = cfg(3, 4, 2);
        let r = rates(&eff, &Beamformer::zero(3, 2), &c);
        assert_eq!(r.r_u, 0.0);
        assert_eq!(r.r_e, 0.0);
        assert_eq!(r.r_s, 0.0);
    }

    #[test]
    fn symmetric_links_give_zero_secrecy() {
        let mut ch = random_channels(3, 4, 10);
        ch.h_be = ch.h_bu.clone();
        ch.h_re = ch.h_ru.clone();
        let mode = ModeSelection::first_connected(4, 1);
        let theta = random_theta(4, 11);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let c = cfg(3, 4, 1);
        let beam = random_beam(3, 1, 12);
        let r = rates(&eff, &beam, &c);
        assert!((r.r_u - r.r_e).abs() < 1e-12);
        assert_eq!(r.r_s, 0.0);
    }

    #[test]
    fn scalar_hand_case() {
        // Single antenna, no connected elements, unit channel, SNR_u = 3,
        // SNR_e = 1: one secrecy bit.
        let ch = ChannelSet {
            g: CMat::zeros(1, 1),
            h_bu: vec![C64::new(1.0, 0.0)],
            h_be: vec![C64::new(1.0 / 3.0f64.sqrt(), 0.0)],
            h_ru: vec![C64::new(0.0, 0.0)],
            h_re: vec![C64::new(0.0, 0.0)],
        };
        let mode = ModeSelection::first_connected(1, 0);
        let theta = ReflectCoefficients::all_ones(1);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let mut c = cfg(1, 1, 0);
        c.power = 3.0;
        let beam = Beamformer {
            w_b: vec![C64::new(3.0f64.sqrt(), 0.0)],
            w_r: vec![],
        };
        let r = rates(&eff, &beam, &c);
        assert!((r.r_u - 2.0).abs() < 1e-12);
        assert!((r.r_e - 1.0).abs() < 1e-12);
        assert!((r.r_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_term_cases() {
        let ch = random_channels(2, 4, 20);
        let theta = random_theta(4, 21);
        let beam = random_beam(2, 2, 22);
        let c = cfg(2, 4, 2);
        // Consistent pair: objective equals the plain ratio.
        let s = vec![true, true, false, false];
        let placement = vec![0, 1];
        let ratio = selection_ratio(&ch, &s, &placement, &theta, &beam, &c);
        let obj = penalty_objective(&ch, &s, &placement, &theta, &beam, &c, 1.0).unwrap();
        assert!((obj - ratio).abs() < 1e-15);
        // Mismatched pair {0,1} vs {0,2} at rho = 1: penalty exactly 1.
        let placement2 = vec![0, 2];
        let ratio2 = selection_ratio(&ch, &s, &placement2, &theta, &beam, &c);
        let obj2 = penalty_objective(&ch, &s, &placement2, &theta, &beam, &c, 1.0).unwrap();
        assert!((ratio2 - obj2 - 1.0).abs() < 1e-12);
        // The penalty term does not depend on theta or the beamformer.
        let theta2 = random_theta(4, 23);
        let beam2 = random_beam(2, 2, 24);
        let ratio3 = selection_ratio(&ch, &s, &placement2, &theta2, &beam2, &c);
        let obj3 = penalty_objective(&ch, &s, &placement2, &theta2, &beam2, &c, 1.0).unwrap();
        assert!((ratio3 - obj3 - 1.0).abs() < 1e-12);
        assert!(penalty_objective(&ch, &s, &placement, &theta, &beam, &c, 0.0).is_err());
    }

    #[test]
    fn secrecy_rate_equals_clamped_log_ratio() {
        let ch = random_channels(3, 5, 30);
        let mode = ModeSelection::from_placement(5, vec![4, 1]);
        let theta = random_theta(5, 31);
        let beam = random_beam(3, 2, 32);
        let c = cfg(3, 5, 2);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let r = rates(&eff, &beam, &c);
        let ratio = selection_ratio(&ch, &mode.s, &mode.placement, &theta, &beam, &c);
        let expect = ratio.log2().max(0.0);
        assert!((r.r_s - expect).abs() < 1e-12);
    }

    #[test]
    fn audit_accepts_boundary_and_rejects_violations() {
        let c = cfg(2, 3, 1);
        let mode = ModeSelection::first_connected(3, 1);
        let theta = ReflectCoefficients::all_ones(3);
        // Exactly full power passes.
        let beam = Beamformer {
            w_b: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            w_r: vec![C64::new(0.0, 0.0)],
        };
        audit_solution(&c, &mode, &theta, &beam).unwrap();
        // Slightly over budget fails.
        let beam_over = Beamformer {
            w_b: vec![C64::new((1.0 + 1e-6f64).sqrt(), 0.0), C64::new(0.0, 0.0)],
            w_r: vec![C64::new(0.0, 0.0)],
        };
        assert!(audit_solution(&c, &mode, &theta, &beam_over).is_err());
        // Off-modulus phase fails.
        let mut theta_bad = ReflectCoefficients::all_ones(3);
        theta_bad.theta[1] = C64::new(0.5, 0.0);
        assert!(audit_solution(&c, &mode, &theta_bad, &beam).is_err());
        // Wrong cardinality fails.
        let mode_bad = ModeSelection::first_connected(3, 2);
        assert!(audit_solution(&c, &mode_bad, &theta, &beam).is_err());
    }

    #[test]
    fn physical_scale_channels_work() {
        // Same code paths at radio scale: tiny amplitudes, tiny noise.
        let ch = generate_channels(
            3,
            8,
            &Geometry::standard(),
            &PathLossModel::standard(),
            1.0,
            77,
        )
        .unwrap();
        let c = SystemConfig {
            n_t: 3,
            n: 8,
            a: 2,
            power: 0.0316,
            sigma2_u: 1e-12,
            sigma2_e: 1e-12,
            sigma2_a: 1e-12,
        };
        let mode = ModeSelection::first_connected(8, 2);
        let theta = ReflectCoefficients::all_ones(8);
        let eff = effective_channels(&ch, &mode, &theta).unwrap();
        let mut beam = random_beam(3, 2, 78);
        let scale = (c.power / beam.power()).sqrt() * 0.999;
        beam.w_b = beam.w_b.iter().map(|z| z * scale).collect();
        beam.w_r = beam.w_r.iter().map(|z| z * scale).collect();
        let r = rates(&eff, &beam, &c);
        assert!(r.r_u.is_finite() && r.r_u > 0.0);
        audit_solution(&c, &mode, &theta, &beam).unwrap();
    }

    proptest! {
        #[test]
        fn global_phase_leaves_rates_unchanged(phi in 0.0..std::f64::consts::TAU, seed in 0u64..50) {
            let ch = random_channels(3, 4, seed);
            let mode = ModeSelection::from_placement(4, vec![3, 0]);
            let theta = random_theta(4, seed + 1);
            let beam = random_beam(3, 2, seed + 2);
            let c = cfg(3, 4, 2);
            let eff = effective_channels(&ch, &mode, &theta).unwrap();
            let r1 = rates(&eff, &beam, &c);
            let rot = C64::from_polar(1.0, phi);
            let beam2 = Beamformer {
                w_b: beam.w_b.iter().map(|z| z * rot).collect(),
                w_r: beam.w_r.iter().map(|z| z * rot).collect(),
            };
            let r2 = rates(&eff, &beam2, &c);
            prop_assert!((r1.r_u - r2.r_u).abs() < 1e-12);
            prop_assert!((r1.r_e - r2.r_e).abs() < 1e-12);
            prop_assert!((r1.r_s - r2.r_s).abs() < 1e-12);
        }

        #[test]
        fn consistency_iff_placement_matches_support(
            n in 2usize..8,
            seed in 0u64..100,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rng.random_range(0..=n);
            let mut idx: Vec<usize> = (0..n).collect();
            // Fisher-Yates
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            let placement: Vec<usize> = idx[..a].to_vec();
            let mode = ModeSelection::from_placement(n, placement.clone());
            prop_assert!(mode.is_consistent());
            prop_assert_eq!(mode.mismatch_count(), 0);
            // Disturb the diagonal: mismatch count doubles the swaps.
            if a >= 1 && a < n {
                let mut s2 = mode.s.clone();
                let on = placement[0];
                let off = (0..n).find(|i| !s2[*i]).unwrap();
                s2[on] = false;
                s2[off] = true;
                let moved = ModeSelection { s: s2, placement };
                prop_assert!(!moved.is_consistent());
                prop_assert_eq!(moved.mismatch_count(), 2);
            }
        }
    }
}

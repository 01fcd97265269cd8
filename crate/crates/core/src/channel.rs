//! Simulation geometry, large-scale path loss, and Rician fading.
//!
//! All generation is a pure function of the configuration and an explicit
//! seed, so Monte-Carlo workers stay reproducible: derive one child seed
//! per realization with [`child_seed`] and hand each worker its own
//! disjoint stream.
//!
//! Line-of-sight conventions (the statistical model does not pin them
//! down, so they are fixed here and documented for reproducibility):
//! the base-station/surface link uses a far-field steering outer product
//! for uniform linear arrays along the x-axis with half-wavelength
//! spacing, where element `k` sees phase `exp(j*pi*k*cos(azimuth))`; the
//! four terminal links use an all-ones rank-one component. Every
//! line-of-sight entry has unit modulus, so fading entries keep a unit
//! second moment.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::scalar::{db_to_linear, std_complex_normal, Real};

/// Node positions in meters (2-D).
#[derive(Clone, Copy, Debug)]
pub struct Geometry<T> {
    pub bs: [T; 2],
    pub rdars: [T; 2],
    pub ue: [T; 2],
    pub eve: [T; 2],
}

fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])).sqrt()
}

impl<T: Real> Geometry<T> {
    /// Default desk geometry: BS at the origin, surface at (10, 5), user
    /// at (45, 0), eavesdropper at (40, 0).
    pub fn standard() -> Self {
        Self {
            bs: [T::zero(), T::zero()],
            rdars: [T::of(10.0), T::of(5.0)],
            ue: [T::of(45.0), T::zero()],
            eve: [T::of(40.0), T::zero()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pts = [self.bs, self.rdars, self.ue, self.eve];
        let names = ["bs", "rdars", "ue", "eve"];
        for i in 0..4 {
            for j in (i + 1)..4 {
                if !(dist(pts[i], pts[j]) > T::zero()) {
                    return Err(Error::InvalidConfig(format!(
                        "geometry: {} and {} coincide",
                        names[i], names[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn d_bs_ue(&self) -> T {
        dist(self.bs, self.ue)
    }
    pub fn d_bs_eve(&self) -> T {
        dist(self.bs, self.eve)
    }
    pub fn d_bs_rdars(&self) -> T {
        dist(self.bs, self.rdars)
    }
    pub fn d_rdars_ue(&self) -> T {
        dist(self.rdars, self.ue)
    }
    pub fn d_rdars_eve(&self) -> T {
        dist(self.rdars, self.eve)
    }
}

/// Distance-power-law path loss with a reference gain.
#[derive(Clone, Copy, Debug)]
pub struct PathLossModel<T> {
    /// Gain at the reference distance, in dB.
    pub beta0_db: T,
    /// Reference distance in meters.
    pub d0: T,
    pub alpha_bu: T,
    pub alpha_be: T,
    pub alpha_ru: T,
    pub alpha_re: T,
    pub alpha_g: T,
}

impl<T: Real> PathLossModel<T> {
    /// Default exponents: 3 on the direct links, 2 on every surface link;
    /// -30 dB reference gain at 1 m.
    pub fn standard() -> Self {
        Self {
            beta0_db: T::of(-30.0),
            d0: T::one(),
            alpha_bu: T::of(3.0),
            alpha_be: T::of(3.0),
            alpha_ru: T::of(2.0),
            alpha_re: T::of(2.0),
            alpha_g: T::of(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > T::zero()) {
            return Err(Error::InvalidConfig("path loss: d0 must be positive".into()));
        }
        for (name, a) in [
            ("alpha_bu", self.alpha_bu),
            ("alpha_be", self.alpha_be),
            ("alpha_ru", self.alpha_ru),
            ("alpha_re", self.alpha_re),
            ("alpha_g", self.alpha_g),
        ] {
            if !(a >= T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "path loss: {} must be non-negative",
                    name
                )));
            }
        }
        Ok(())
    }
}

/// Amplitude gain `sqrt(beta0 * (d0/d)^alpha)` at distance `d`.
pub fn path_loss_amplitude<T: Real>(d: T, exponent: T, model: &PathLossModel<T>) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "path loss: distance must be positive, got {}",
            d
        )));
    }
    let beta0 = db_to_linear(model.beta0_db);
    Ok((beta0 * (model.d0 / d).powf(exponent)).sqrt())
}

/// All five channels of one realization.
///
/// `g` is the `N_t x N` matrix from the base station to the surface;
/// `h_bu`/`h_be` are the direct links to the user and eavesdropper
/// (length `N_t`), and `h_ru`/`h_re` the surface links (length `N`).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet<T> {
    pub g: CMat<T>,
    pub h_bu: Vec<Complex<T>>,
    pub h_be: Vec<Complex<T>>,
    pub h_ru: Vec<Complex<T>>,
    pub h_re: Vec<Complex<T>>,
}

impl<T: Real> ChannelSet<T> {
    pub fn n_t(&self) -> usize {
        self.g.rows()
    }

    pub fn n(&self) -> usize {
        self.g.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_t, n) = (self.n_t(), self.n());
        if self.h_bu.len() != n_t || self.h_be.len() != n_t {
            return Err(Error::Dimension(format!(
                "direct links have lengths {}/{}, expected {}",
                self.h_bu.len(),
                self.h_be.len(),
                n_t
            )));
        }
        if self.h_ru.len() != n || self.h_re.len() != n {
            return Err(Error::Dimension(format!(
                "surface links have lengths {}/{}, expected {}",
                self.h_ru.len(),
                self.h_re.len(),
                n
            )));
        }
        self.g.ensure_finite()?;
        for v in [&self.h_bu, &self.h_be, &self.h_ru, &self.h_re] {
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidConfig("non-finite channel entry".into()));
            }
        }
        Ok(())
    }

    /// Copy with the base-station/surface matrix zeroed, removing the
    /// reflection path entirely (used by the distributed-antenna baseline).
    pub fn without_reflection_path(&self) -> Self {
        let mut out = self.clone();
        out.g = CMat::zeros(self.n_t(), self.n());
        out
    }

    /// Serializes as text: a dims header followed by each block in
    /// row-major `re im` pairs, one matrix row per line.
    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "channel-set v1")?;
        writeln!(out, "nt {} n {}", self.n_t(), self.n())?;
        let write_row = |out: &mut W, row: &[Complex<T>]| -> std::io::Result<()> {
            let mut line = String::new();
            for (j, z) in row.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:e} {:e}", z.re, z.im));
            }
            writeln!(out, "{}", line)
        };
        writeln!(out, "G")?;
        for i in 0..self.g.rows() {
            write_row(out, self.g.row(i))?;
        }
        for (name, v) in [
            ("h_bu", &self.h_bu),
            ("h_be", &self.h_be),
            ("h_ru", &self.h_ru),
            ("h_re", &self.h_re),
        ] {
            writeln!(out, "{}", name)?;
            write_row(out, v)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of channel file".into()))?
                .map_err(Error::from)
        };
        let header = next()?;
        if header.trim() != "channel-set v1" {
            return Err(Error::Parse(format!("bad header: {header}")));
        }
        let dims = next()?;
        let parts: Vec<&str> = dims.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "nt" || parts[2] != "n" {
            return Err(Error::Parse(format!("bad dims line: {dims}")));
        }
        let n_t: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad nt: {}", parts[1])))?;
        let n: usize = parts[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad n: {}", parts[3])))?;
        let parse_row = |line: &str, expect: usize| -> Result<Vec<Complex<T>>> {
            let nums: Vec<T> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map(T::of)
                        .map_err(|_| Error::Parse(format!("bad number: {t}")))
                })
                .collect::<Result<_>>()?;
            if nums.len() != 2 * expect {
                return Err(Error::Parse(format!(
                    "expected {} complex entries, got {}",
                    expect,
                    nums.len() / 2
                )));
            }
            Ok(nums.chunks(2).map(|c| Complex::new(c[0], c[1])).collect())
        };
        let expect_tag = |line: String, tag: &str| -> Result<()> {
            if line.trim() == tag {
                Ok(())
            } else {
                Err(Error::Parse(format!("expected section {tag}, got {line}")))
            }
        };
        expect_tag(next()?, "G")?;
        let mut g = CMat::zeros(n_t, n);
        for i in 0..n_t {
            let row = parse_row(&next()?, n)?;
            for (j, z) in row.into_iter().enumerate() {
                g[(i, j)] = z;
            }
        }
        let mut vecs: Vec<Vec<Complex<T>>> = Vec::new();
        for (tag, len) in [("h_bu", n_t), ("h_be", n_t), ("h_ru", n), ("h_re", n)] {
            expect_tag(next()?, tag)?;
            vecs.push(parse_row(&next()?, len)?);
        }
        let h_re = vecs.pop().unwrap();
        let h_ru = vecs.pop().unwrap();
        let h_be = vecs.pop().unwrap();
        let h_bu = vecs.pop().unwrap();
        let out = Self {
            g,
            h_bu,
            h_be,
            h_ru,
            h_re,
        };
        out.validate()?;
        Ok(out)
    }
}

/// Steering vector of a uniform linear array along the x-axis with
/// half-wavelength spacing, toward azimuth `phi`.
fn steering<T: Real>(len: usize, phi: T) -> Vec<Complex<T>> {
    let pi = T::of(std::f64::consts::PI);
    (0..len)
        .map(|k| Complex::from_polar(T::one(), pi * T::of(k as f64) * phi.cos()))
        .collect()
}

fn azimuth<T: Real>(from: [T; 2], to: [T; 2]) -> T {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Deterministic line-of-sight component of the base-station/surface
/// matrix: `a_bs a_surface^H` with link-geometry-derived angles.
pub fn los_bs_surface<T: Real>(n_t: usize, n: usize, geometry: &Geometry<T>) -> CMat<T> {
    let a_bs = steering(n_t, azimuth(geometry.bs, geometry.rdars));
    let a_rd = steering(n, azimuth(geometry.rdars, geometry.bs));
    CMat::outer(&a_bs, &a_rd)
}

/// Draws one Rician-faded matrix `sqrt(K/(K+1)) * los + sqrt(1/(K+1)) * W`
/// where `W` has i.i.d. unit-variance circularly-symmetric Gaussian
/// entries drawn in row-major order. An infinite factor returns the
/// line-of-sight component exactly.
pub fn sample_rician<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rician_k: T,
    los: &CMat<T>,
    rng: &mut R,
) -> Result<CMat<T>> {
    if rician_k < T::zero() || rician_k.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "Rician factor must be non-negative, got {}",
            rician_k
        )));
    }
    if los.rows() != rows || los.cols() != cols {
        return Err(Error::Dimension(format!(
            "line-of-sight component is {}x{}, expected {}x{}",
            los.rows(),
            los.cols(),
            rows,
            cols
        )));
    }
    if rician_k.is_infinite() {
        return Ok(los.clone());
    }
    let los_w = (rician_k / (rician_k + T::one())).sqrt();
    let nlos_w = (T::one() / (rician_k + T::one())).sqrt();
    let mut out = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = los[(i, j)] * los_w + std_complex_normal::<T, _>(rng) * nlos_w;
        }
    }
    Ok(out)
}

/// Generates one full channel realization. Deterministic for a fixed
/// seed; the five blocks are drawn in the order `G`, `h_bu`, `h_be`,
/// `h_ru`, `h_re`.
pub fn generate_channels<T: Real>(
    n_t: usize,
    n: usize,
    geometry: &Geometry<T>,
    model: &PathLossModel<T>,
    rician_k: T,
    seed: u64,
) -> Result<ChannelSet<T>> {
    if n_t < 1 || n < 1 {
        return Err(Error::InvalidConfig(format!(
            "channel dimensions must be at least 1, got N_t={n_t}, N={n}"
        )));
    }
    geometry.validate()?;
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ones = |len: usize| CMat::from_fn(len, 1, |_, _| Complex::new(T::one(), T::zero()));

    let amp_g = path_loss_amplitude(geometry.d_bs_rdars(), model.alpha_g, model)?;
    let g = sample_rician(n_t, n, rician_k, &los_bs_surface(n_t, n, geometry), &mut rng)?
        .scale(amp_g);

    let vector_link = |len: usize, d: T, alpha: T, rng: &mut ChaCha8Rng| -> Result<Vec<Complex<T>>> {
        let amp = path_loss_amplitude(d, alpha, model)?;
        let m = sample_rician(len, 1, rician_k, &ones(len), rng)?.scale(amp);
        Ok(m.col_vec(0))
    };
    let h_bu = vector_link(n_t, geometry.d_bs_ue(), model.alpha_bu, &mut rng)?;
    let h_be = vector_link(n_t, geometry.d_bs_eve(), model.alpha_be, &mut rng)?;
    let h_ru = vector_link(n, geometry.d_rdars_ue(), model.alpha_ru, &mut rng)?;
    let h_re = vector_link(n, geometry.d_rdars_eve(), model.alpha_re, &mut rng)?;

    Ok(ChannelSet {
        g,
        h_bu,
        h_be,
        h_ru,
        h_re,
    })
}

/// Derives the child seed for one Monte-Carlo realization from the root
/// seed. SplitMix64 over `root + (index+1) * golden-ratio` keeps the
/// streams decorrelated and is stable across platforms.
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(root.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// One step of the SplitMix64 generator.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    type G64 = Geometry<f64>;
    type P64 = PathLossModel<f64>;

    #[test]
    fn reference_distance_amplitude() {
        // -30 dB at 1 m: amplitude sqrt(1e-3) regardless of exponent.
        let m = P64::standard();
        for alpha in [0.0, 2.0, 3.7] {
            let a = path_loss_amplitude(1.0, alpha, &m).unwrap();
            assert!((a - 1e-3f64.sqrt()).abs() < 1e-15);
        }
        assert!((path_loss_amplitude(1.0, 2.0, &m).unwrap() - 0.0316227766).abs() < 1e-9);
    }

    #[test]
    fn direct_formula_at_ten_meters() {
        let m = P64::standard();
        let a = path_loss_amplitude(10.0, 2.0, &m).unwrap();
        assert!((a - 10f64.powf(-2.5)).abs() < 1e-15);
    }

    #[test]
    fn bs_surface_amplitude_for_standard_geometry() {
        let g = G64::standard();
        let d = g.d_bs_rdars();
        assert!((d - 125f64.sqrt()).abs() < 1e-12);
        let a = path_loss_amplitude(d, 2.0, &P64::standard()).unwrap();
        assert!((a - (1e-3f64 / 125.0).sqrt()).abs() < 1e-12);
        assert!((a - 2.8284271e-3).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_distance_rejected() {
        let m = P64::standard();
        assert!(path_loss_amplitude(0.0, 2.0, &m).is_err());
        assert!(path_loss_amplitude(-1.0, 2.0, &m).is_err());
    }

    #[test]
    fn rician_limit_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let los = los_bs_surface::<f64>(3, 4, &G64::standard());
        // K -> infinity returns the line-of-sight component exactly.
        let h = sample_rician(3, 4, f64::INFINITY, &los, &mut rng).unwrap();
        assert_eq!(h, los);
        assert!(sample_rician(3, 4, -0.5, &los, &mut rng).is_err());
    }

    #[test]
    fn rician_unit_second_moment_at_k_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let los = CMat::from_fn(1, 1, |_, _| Complex::new(1.0, 0.0));
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = sample_rician(1, 1, 0.0, &los, &mut rng).unwrap();
            acc += h[(0, 0)].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((0.99..=1.01).contains(&mean), "mean power {mean}");
    }

    #[test]
    fn rician_mean_matches_los_at_k_one() {
        // Sample mean converges to sqrt(1/2) * los entrywise; allow three
        // standard errors on the real and imaginary parts.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let los = los_bs_surface::<f64>(2, 3, &G64::standard());
        let draws = 100_000usize;
        let mut acc = CMat::<f64>::zeros(2, 3);
        for _ in 0..draws {
            let h = sample_rician(2, 3, 1.0, &los, &mut rng).unwrap();
            acc = acc.add(&h);
        }
        let mean = acc.scale(1.0 / draws as f64);
        let expected = los.scale(0.5f64.sqrt());
        // Per-component std of the diffuse part is sqrt(1/(2(K+1))) = 0.5.
        let se3 = 3.0 * 0.5 / (draws as f64).sqrt();
        for i in 0..2 {
            for j in 0..3 {
                let d = mean[(i, j)] - expected[(i, j)];
                assert!(d.re.abs() < se3, "re deviation {} at ({i},{j})", d.re);
                assert!(d.im.abs() < se3, "im deviation {} at ({i},{j})", d.im);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_shaped() {
        let g = G64::standard();
        let m = P64::standard();
        let a = generate_channels(5, 100, &g, &m, 1.0, 42).unwrap();
        let b = generate_channels(5, 100, &g, &m, 1.0, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.g.rows(), 5);
        assert_eq!(a.g.cols(), 100);
        assert_eq!(a.h_bu.len(), 5);
        assert_eq!(a.h_ru.len(), 100);
        let c = generate_channels(5, 100, &g, &m, 1.0, 43).unwrap();
        assert_ne!(a, c);
        assert!(generate_channels(0, 4, &g, &m, 1.0, 1).is_err());
    }

    #[test]
    fn direct_link_mean_power_matches_analytic() {
        let g = G64::standard();
        let m = P64::standard();
        let n_t = 5;
        let expected = n_t as f64 * 1e-3 * g.d_bs_ue().powf(-3.0);
        let mut acc = 0.0;
        let seeds = 10_000u64;
        for s in 0..seeds {
            let ch = generate_channels(n_t, 2, &g, &m, 1.0, child_seed(7, s)).unwrap();
            acc += ch.h_bu.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / seeds as f64;
        let rel = (mean - expected).abs() / expected;
        assert!(rel < 0.02, "relative deviation {rel}");
    }

    #[test]
    fn distance_scaling_scales_los_amplitude() {
        // Scaling all coordinates by c multiplies each link amplitude by
        // c^(-alpha/2); checked on the deterministic component (K = inf).
        let base = G64::standard();
        let c = 2.0;
        let scaled = Geometry {
            bs: [base.bs[0] * c, base.bs[1] * c],
            rdars: [base.rdars[0] * c, base.rdars[1] * c],
            ue: [base.ue[0] * c, base.ue[1] * c],
            eve: [base.eve[0] * c, base.eve[1] * c],
        };
        let m = P64::standard();
        let a = generate_channels(3, 4, &base, &m, f64::INFINITY, 1).unwrap();
        let b = generate_channels(3, 4, &scaled, &m, f64::INFINITY, 1).unwrap();
        // Surface matrix: alpha_g = 2 -> factor c^-1. Angles are scale
        // invariant, so entries divide exactly.
        for i in 0..3 {
            for j in 0..4 {
                let ratio = b.g[(i, j)] / a.g[(i, j)];
                assert!((ratio.re - 1.0 / c).abs() < 1e-12 && ratio.im.abs() < 1e-12);
            }
        }
        // Direct link: alpha = 3 -> factor c^-1.5.
        let r = b.h_bu[0] / a.h_bu[0];
        assert!((r.re - c.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn serialization_round_trip() {
        let ch = generate_channels(
            3,
            5,
            &G64::standard(),
            &P64::standard(),
            1.0,
            child_seed(1, 2),
        )
        .unwrap();
        let mut buf = Vec::new();
        ch.write_to(&mut buf).unwrap();
        let back = ChannelSet::<f64>::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
        // Text round trip is not bit exact, but must agree tightly.
        assert!(back.g.sub(&ch.g).fro_norm() < 1e-12 * (1.0 + ch.g.fro_norm()));
        for (a, b) in back.h_ru.iter().zip(&ch.h_ru) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn child_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000 {
            assert!(seen.insert(child_seed(123, i)));
        }
    }
}

//! Scalar abstraction.
//!
//! All numerics in this crate are generic over a real floating-point type
//! implementing [`Real`]; complex quantities are `num_complex::Complex<T>`
//! over the same type. Concrete aliases for the common `f64` instantiation
//! live at the crate root.

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;

/// Real scalar underlying all computations (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; panics if the value is not representable.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    /// Draws one standard-normal sample.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }
}

impl Real for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }
}

/// One circularly-symmetric complex Gaussian draw with unit variance
/// (`E[|z|^2] = 1`).
pub fn std_complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let half = T::of(0.5).sqrt();
    Complex::new(T::std_normal(rng) * half, T::std_normal(rng) * half)
}

/// Converts a decibel quantity to linear scale.
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

/// Converts a dBm power to linear watts.
pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    db_to_linear(dbm - T::of(30.0))
}

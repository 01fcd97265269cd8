//! Secrecy-rate optimization for a hybrid reflect/connect surface downlink.
//!
//! A base station serves one user in the presence of one eavesdropper,
//! assisted by a surface whose elements either reflect with a programmable
//! phase or act as wired remote transmit antennas. This crate provides the
//! building blocks to jointly optimize the transmit beamformers, the
//! per-element reflection phases, and the binary connect/reflect mode
//! assignment so that the secrecy rate is maximized:
//!
//! * [`linalg`] — dense complex Hermitian eigendecomposition and solves;
//! * [`sdp`] — a small dense primal-dual interior-point SDP solver;
//! * [`channel`] — geometry, path loss, and Rician fading generation;
//! * [`model`] — system configuration, effective channels, rates, and the
//!   penalized objective shared by all solvers;
//! * [`modesel`] — penalized fractional-programming mode selection;
//! * [`beamform`] — closed-form active beamforming via a generalized
//!   Rayleigh quotient;
//! * [`reflect`] — reflection-phase optimization through a fractional SDP
//!   relaxation with randomized rank-one recovery;
//! * [`ao`] — the alternating-optimization driver and baseline schemes.
//!
//! All numerics are generic over the real scalar type through
//! [`scalar::Real`]; the aliases below fix the common `f64` instantiation.

pub mod ao;
pub mod beamform;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod model;
pub mod modesel;
pub mod reflect;
pub mod scalar;
pub mod sdp;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex scalar over `f64`.
pub type C64 = num_complex::Complex<f64>;
/// Complex scalar over `f32`.
pub type C32 = num_complex::Complex<f32>;
/// Dense complex matrix over `f64`.
pub type Mat64 = linalg::CMat<f64>;
/// Dense complex matrix over `f32`.
pub type Mat32 = linalg::CMat<f32>;
/// Hermitian eigendecomposition over `f64`.
pub type Evd64 = linalg::HermitianEvd<f64>;

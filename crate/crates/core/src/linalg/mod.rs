//! Dense complex linear algebra shared by all solvers.
//!
//! Everything here is a pure function over immutable inputs; all routines
//! are safe to call concurrently. Targeted at Hermitian problems of
//! dimension up to a few hundred.

mod chol;
mod evd;
mod mat;

pub use chol::{
    cholesky, inverse_hermitian, solve_hermitian, solve_hermitian_vec, solve_lower,
    solve_lower_adjoint,
};
pub use evd::{hermitian_evd, max_eigenvalue, min_eigenvalue, HermitianEvd};
pub use mat::{add_vec, cdot, norm, norm_sq, scale_vec, sub_vec, zeros_vec, CMat};

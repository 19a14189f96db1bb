//! Numerical core for entropic dynamics.
//!
//! The crate builds without `std` (an allocator is still required). Enable the
//! `libm` feature in that case so that floating-point functions are available.
//!
//! Layout:
//! - [`grid`]: configuration-space grids, fields and the difference/quadrature primitives.
//! - [`system`]: particle masses, charges and the sub-quantum constants.
//! - [`entropic`]: the maximum-entropy short step, Chapman-Kolmogorov iteration, Bayes reversal.
//! - [`quantum`]: covariant Hamiltonian, Crank-Nicolson flow, Madelung variables, gauge and winding tools.
//! - [`stochastic`]: trajectory samplers, ensemble statistics and the Bohmian / center-of-mass limits.
//! - [`geometry`]: symplectic form, Fubini-Study metric and Killing flows on a finite simplex.
//! - [`stats`]: histogram divergences with calibrated noise bands, power-law and convergence fits.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("ed-core needs either the `std` or the `libm` feature for floating-point math");

pub mod entropic;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod quantum;
pub mod rng;
pub mod stats;
pub mod stochastic;
pub mod system;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub(crate) mod prelude {
    pub(crate) use alloc::boxed::Box;
    pub(crate) use alloc::vec;
    pub(crate) use alloc::vec::Vec;
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

#[inline]
pub(crate) fn rem_euclid(a: f64, b: f64) -> f64 {
    let r = a % b;
    if r < 0.0 {
        r + b
    } else {
        r
    }
}

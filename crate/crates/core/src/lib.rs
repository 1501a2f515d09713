//! Simulation and analysis of two-photocurrent detectors.
//!
//! Eight-port homodyne, six-port homodyne and heterodyne detection all
//! measure the real and imaginary parts of the complex photocurrent
//! `Z = a + b†`, where `a` is the signal mode and `b` an idler (probe) mode.
//! This crate builds the three devices from their linear-optical networks,
//! samples their rescaled photocurrents, derives their leading-order
//! photocurrent operators, and computes the phase-space output
//! distribution (propensity) that the samples must follow.
//!
//! Module map:
//! - [`fock`]: truncated Fock-space states and operators.
//! - [`linopt`]: scattering matrices, couplers and their Fock-space lift.
//! - [`photodet`]: photon counting with finite quantum efficiency.
//! - [`schemes`]: the three detectors end to end.
//! - [`phasespace`]: characteristic functions, Wigner functions, propensities.
//! - [`stats`]: two-sample tests and moment helpers.
//! - [`cli`]: configuration and the experiment runner behind the binary.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fock;
pub mod linopt;
pub mod phasespace;
pub mod photodet;
pub mod schemes;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Environment variable overriding the Fock dimension resource limit.
pub const DIM_LIMIT_ENV: &str = "TWOPHOTO_DIM_LIMIT";

/// Default limit on the number of basis states of a truncated Fock space
/// handled as a state vector.
pub const DEFAULT_STATE_DIM_LIMIT: usize = 200_000;

/// Default limit on the dimension of a dense Fock-space operator.
pub const DEFAULT_DENSE_DIM_LIMIT: usize = 4096;

fn env_dim_limit() -> Option<usize> {
    std::env::var(DIM_LIMIT_ENV).ok()?.trim().parse().ok()
}

/// Dimension limit for state vectors, honouring `TWOPHOTO_DIM_LIMIT`.
pub fn state_dim_limit() -> usize {
    env_dim_limit().unwrap_or(DEFAULT_STATE_DIM_LIMIT)
}

/// Dimension limit for dense operators, honouring `TWOPHOTO_DIM_LIMIT`.
pub fn dense_dim_limit() -> usize {
    env_dim_limit().unwrap_or(DEFAULT_DENSE_DIM_LIMIT)
}

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

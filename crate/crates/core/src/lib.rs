//! Chernoff product formulas for time-inhomogeneous evolution families.
//!
//! [`evolution`] holds the generic contracts (partitions, propagator and
//! generator families, the Chernoff product and its diagnostics). Two
//! instantiations build on it: [`matrix`] for `R^n` with exact oracles, and
//! [`circle`] for the drifted Gaussian kernel construction of a diffusion on
//! the unit circle. [`sde`] supplies an independent Monte Carlo oracle for
//! the circle diffusion.

// `!(a < b)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod error;
pub mod evolution;
pub mod ini;
pub mod matrix;
pub mod sde;

pub use error::{Error, Result};

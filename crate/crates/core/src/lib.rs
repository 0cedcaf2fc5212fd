//! Spectral-Galerkin laboratory for the Wick-renormalized damped stochastic
//! wave equation with polynomial interaction
//!
//! ```text
//! u_tt + u_t + (1 - Δ) u + :p(u): = √2 ξ   on T² = (ℝ/2πℤ)²
//! ```
//!
//! at a fixed spectral truncation `|n|_∞ ≤ N`, together with its Gibbs
//! measure, the reference Gaussian measure and the Girsanov coupling shift
//! used to compare trajectories started from shifted initial data.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gibbs;
pub mod spectral;
pub mod wick;

pub use error::{Error, Result, SnapshotError};

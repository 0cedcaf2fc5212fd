//! Reproducible experiments built on the library modules.
//!
//! Every experiment is a pure function of its configuration and seed.
//! Randomness comes from ChaCha8 streams: stream `s` of seed `k` is
//! `ChaCha8Rng::seed_from_u64(k)` followed by `set_stream(s)`. Stream ids are
//! fixed per role (see [`streams`]), so changing an ensemble size never
//! changes the draws of any given path. Ensembles run in parallel, results
//! are collected in path order and reduced sequentially.

mod coupling_runs;
mod covariance;
mod gate;
mod invariance;
pub mod stats;

pub use coupling_runs::{
    contraction_experiment, epsilon0_sweep, gibbs_initial, girsanov_experiment, sigmoid_mass, ContractionReport,
    CouplingConfig, GirsanovOutcome,
};
pub use covariance::{covariance_experiment, CovarianceConfig, CovarianceReport, CovarianceRow};
pub use gate::{hmc_gate, HmcGateConfig, HmcGateReport};
pub use invariance::{gibbs_ensemble, invariance_experiment, InvarianceConfig, InvarianceReport, ObservableComparison};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream ids used by the experiments.
pub mod streams {
    /// Gibbs chain that supplies initial data.
    pub const CHAIN: u64 = 0;
    /// Shape of the coupling shift `v₀`.
    pub const SHIFT: u64 = 1;
    /// Independent samples for `ediff` and importance sampling.
    pub const AUX: u64 = 2;
    const PATH_BASE: u64 = 1 << 32;
    const HALVED_BASE: u64 = 2 << 32;
    const DIRECT_BASE: u64 = 3 << 32;

    /// Path `i` of an ensemble.
    pub fn path(i: usize) -> u64 {
        PATH_BASE + i as u64
    }

    /// Path `i` rerun at half the step.
    pub fn halved(i: usize) -> u64 {
        HALVED_BASE + i as u64
    }

    /// Path `i` of the plain (unshifted) comparison ensemble.
    pub fn direct(i: usize) -> u64 {
        DIRECT_BASE + i as u64
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Attaches the seed and stream to a failure on one path.
pub(crate) fn tag(seed: u64, stream: u64) -> impl FnOnce(Error) -> Error {
    move |e| Error::PathFailed { seed, stream, source: Box::new(e) }
}

/// Empirical check of
/// `E|f₁ - f₂| ≤ E f₁ + E f₂ - η (P(f₁ ≥ η) + P(f₂ ≥ η) - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdiffReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides under the joint empirical measure of the paired
/// samples. The inequality holds pointwise, so it must hold exactly here up
/// to rounding.
pub fn ediff_property(f1: &[f64], f2: &[f64], eta: f64) -> Result<EdiffReport> {
    if f1.len() != f2.len() || f1.is_empty() {
        return Err(Error::InvalidParameter("samples must be non-empty and paired".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be >= 0")));
    }
    for (index, &value) in f1.iter().chain(f2).enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeSample { index, value });
        }
    }
    let n = f1.len() as f64;
    let lhs = f1.iter().zip(f2).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let m1 = f1.iter().sum::<f64>() / n;
    let m2 = f2.iter().sum::<f64>() / n;
    let p1 = f1.iter().filter(|&&a| a >= eta).count() as f64 / n;
    let p2 = f2.iter().filter(|&&b| b >= eta).count() as f64 / n;
    let rhs = m1 + m2 - eta * (p1 + p2 - 1.0);
    let holds = lhs <= rhs + 1e-12 * (m1 + m2 + eta).max(1.0);
    Ok(EdiffReport { lhs, rhs, holds })
}

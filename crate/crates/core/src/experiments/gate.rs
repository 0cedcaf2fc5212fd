use rayon::prelude::*;

use super::stats::summarize;
use super::{stream_rng, streams};
use crate::dynamics::Integrator;
use crate::error::{Error, Result};
use crate::spectral::{h_norm, PairField, TorusSpec};
use crate::wick::{Polynomial, WickContext};

/// Accept/reject gate on the time-and-ensemble average of
/// `‖:p(u):‖_{H^{-ε}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HmcGateConfig {
    pub spec: TorusSpec,
    pub interaction: Polynomial,
    pub dt: f64,
    pub t_final: f64,
    pub paths: usize,
    /// Acceptance threshold `K`.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for HmcGateConfig {
    fn default() -> Self {
        Self {
            spec: TorusSpec::dealiased(8, 0.1, 4).expect("valid default spec"),
            interaction: Polynomial::monomial(4, 0.25),
            dt: 0.01,
            t_final: 2.0,
            paths: 16,
            threshold: 10.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmcGateReport {
    /// `(1/M) Σ_j (1/T) ∫₀ᵀ ‖:p(Φ_t):‖_{H^{-ε}} dt`; infinite after a blow-up.
    pub statistic: f64,
    /// Standard error over the `M` paths.
    pub stderr: f64,
    pub accept: bool,
    pub blew_up: bool,
}

/// Time average of the nonlinearity norm along one path (trapezoid rule on
/// the step grid).
fn path_average(integ: &Integrator, u0: &PairField, steps: usize, seed: u64, i: usize) -> Result<f64> {
    let mut rng = stream_rng(seed, streams::path(i));
    let eps = integ.context().spec().epsilon;
    let mut x = u0.clone();
    let mut prev = h_norm(&integ.force(&x.u)?, -eps);
    let mut acc = 0.0;
    for s in 0..steps {
        x = integ.step(&x, s as f64 * integ.dt(), &mut rng)?;
        let cur = h_norm(&integ.force(&x.u)?, -eps);
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    Ok(acc / steps as f64)
}

pub fn hmc_gate(u0: &PairField, cfg: &HmcGateConfig) -> Result<HmcGateReport> {
    if !(cfg.threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("K = {} must be >= 0", cfg.threshold)));
    }
    let integ = Integrator::from_interaction(WickContext::new(cfg.spec)?, &cfg.interaction, cfg.dt)?;
    let steps = integ.steps_for(cfg.t_final)?;
    let outcomes: Vec<Result<f64>> =
        (0..cfg.paths).into_par_iter().map(|i| path_average(&integ, u0, steps, cfg.seed, i)).collect();
    let mut values = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(Error::BlowUp { .. }) => {
                return Ok(HmcGateReport { statistic: f64::INFINITY, stderr: f64::NAN, accept: false, blew_up: true })
            }
            Err(e) => return Err(e),
        }
    }
    let s = summarize(&values);
    Ok(HmcGateReport { statistic: s.mean, stderr: s.stderr, accept: s.mean <= cfg.threshold, blew_up: false })
}

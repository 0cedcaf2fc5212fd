use rayon::prelude::*;

use super::invariance::gibbs_ensemble;
use super::stats::{summarize, Summary};
use super::{stream_rng, streams, tag};
use crate::coupling::{
    envelope_violation, epsilon0_estimate, girsanov_check, replay_shifted, run_coupling, smooth_shift,
    sobolev_envelope_holds, Coupler, CouplingParams, CouplingRecord, Epsilon0Estimate, GirsanovReport,
};
use crate::dynamics::{decay_constant, Integrator};
use crate::error::{Error, Result};
use crate::gibbs::ChainSchedule;
use crate::spectral::{sobolev, PairField, TorusSpec};
use crate::wick::{Polynomial, WickContext};

/// Settings shared by the coupling experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingConfig {
    pub spec: TorusSpec,
    pub interaction: Polynomial,
    pub dt: f64,
    pub t_final: f64,
    pub paths: usize,
    /// `‖v₀‖_{ℋ^{1-ε}}`.
    pub v0_norm: f64,
    pub params: CouplingParams,
    pub chain: ChainSchedule,
    pub beta: f64,
    /// Grid of `η` values for the coupling-probability bound.
    pub etas: Vec<f64>,
    /// Horizon of the shifted-run replay check.
    pub residual_time: f64,
    pub seed: u64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            spec: TorusSpec::dealiased(16, 0.1, 4).expect("valid default spec"),
            interaction: Polynomial::monomial(4, 0.25),
            dt: 0.01,
            t_final: 10.0,
            paths: 100,
            v0_norm: 0.1,
            params: CouplingParams::default(),
            chain: ChainSchedule::default(),
            beta: 0.5,
            etas: (1..20).map(|i| i as f64 / 20.0).collect(),
            residual_time: 2.0,
            seed: 1,
        }
    }
}

impl CouplingConfig {
    fn coupler(&self, v0_norm: f64) -> Result<Coupler> {
        let ctx = WickContext::new(self.spec)?;
        Coupler::new(Integrator::from_interaction(ctx, &self.interaction, self.dt)?, v0_norm)
    }

    /// The shift `v₀`: a fixed smooth shape from stream [`streams::SHIFT`]
    /// scaled to the requested norm.
    pub fn shift(&self, norm: f64) -> PairField {
        let mut rng = stream_rng(self.seed, streams::SHIFT);
        smooth_shift(self.spec.n_max, self.spec.epsilon, norm, &mut rng)
    }
}

/// Common initial datum `u₀`: the chain state after burn-in and one thinned
/// interval.
pub fn gibbs_initial(cfg: &CouplingConfig) -> Result<PairField> {
    let (mut states, _, _) = gibbs_ensemble(&cfg.spec, &cfg.interaction, &cfg.chain, cfg.beta, 1, cfg.seed)?;
    Ok(states.pop().expect("one sample requested"))
}

/// Outcome of the pathwise contraction experiment.
#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub paths: usize,
    /// Paths on which some `A` within the doubling cap met the envelope.
    pub accepted: usize,
    /// Final `A` per accepted path.
    pub final_a: Vec<f64>,
    /// The adapted-norm envelope `‖w(t)‖ ≤ ‖v₀‖ e^{-t/4}` on every accepted path.
    pub envelope_ok: bool,
    /// `sup ‖S(t)‖ e^{t/2}`, the equivalence constant to the plain norm.
    pub norm_constant: f64,
    /// `‖w(t)‖_{ℋ^{1-ε}} ≤ norm_constant · ‖v₀‖ e^{-t/4}` on every accepted path.
    pub sobolev_envelope_ok: bool,
    /// Fraction of accepted paths meeting the plain-norm envelope with constant 1.
    pub strict_fraction: f64,
    /// `‖(r + w) - Φ(u₀ + v₀; ξ + h)‖_{ℋ^{-ε}}` at `residual_time` on path 0.
    pub residual: f64,
    /// Empirical constant `∫‖h‖² / ((1 + ‖v₀‖^{2k-2}) ‖v₀‖)`.
    pub cm_constant: Summary,
    pub records: Vec<CouplingRecord>,
}

pub fn contraction_experiment(cfg: &CouplingConfig) -> Result<ContractionReport> {
    let u0 = gibbs_initial(cfg)?;
    let v0 = cfg.shift(cfg.v0_norm);
    let coupler = cfg.coupler(cfg.v0_norm)?;
    let outcomes: Vec<Result<CouplingRecord>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let rng = stream_rng(cfg.seed, streams::path(i));
            run_coupling(&coupler, &u0, &v0, cfg.t_final, &cfg.params, &rng)
        })
        .collect();
    let mut records = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(Error::NonContraction { .. }) => {}
            Err(e) => return Err(tag(cfg.seed, streams::path(i))(e)),
        }
    }
    let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01 * cfg.t_final.max(1.0)).collect();
    let norm_constant = decay_constant(cfg.spec.n_max, &times);
    let envelope_ok = records.iter().all(|r| envelope_violation(r).is_none());
    let sobolev_envelope_ok = records.iter().all(|r| sobolev_envelope_holds(r, norm_constant));
    let strict = records.iter().filter(|r| sobolev_envelope_holds(r, 1.0)).count();
    let strict_fraction = if records.is_empty() { 0.0 } else { strict as f64 / records.len() as f64 };

    let residual = match records.first() {
        Some(first) if cfg.residual_time > 0.0 => {
            let params = CouplingParams { keep_shifts: true, ..cfg.params };
            let steps = coupler.integrator().steps_for(cfg.residual_time)?;
            let mut rng = stream_rng(cfg.seed, streams::path(0));
            let rec = coupler.run_once(&u0, &v0, steps, first.a, &params, &mut rng)?;
            let mut replay = stream_rng(cfg.seed, streams::path(0));
            let x = replay_shifted(&coupler, &(&u0 + &v0), &rec.shifts, &mut replay)?;
            sobolev(&(&x - &rec.shifted()), -cfg.spec.epsilon)
        }
        _ => f64::NAN,
    };

    let v = cfg.v0_norm;
    let scale = (1.0 + v.powi(cfg.spec.two_k as i32 - 2)) * v;
    let ks: Vec<f64> = records.iter().map(|r| r.cm_energy / scale).collect();
    Ok(ContractionReport {
        paths: cfg.paths,
        accepted: records.len(),
        final_a: records.iter().map(|r| r.a).collect(),
        envelope_ok,
        norm_constant,
        sobolev_envelope_ok,
        strict_fraction,
        residual,
        cm_constant: summarize(&ks),
        records,
    })
}

/// Fixed-`A` coupling runs for every path. A fixed `A` keeps the shift
/// adapted, which the likelihood weights require.
fn fixed_a_records(cfg: &CouplingConfig, u0: &PairField, norm: f64) -> Result<Vec<CouplingRecord>> {
    let v0 = cfg.shift(norm);
    let coupler = cfg.coupler(norm)?;
    let steps = coupler.integrator().steps_for(cfg.t_final)?;
    (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let stream = streams::path(i);
            let mut rng = stream_rng(cfg.seed, stream);
            coupler.run_once(u0, &v0, steps, cfg.params.a, &cfg.params, &mut rng).map_err(tag(cfg.seed, stream))
        })
        .collect()
}

/// Bounded test observable `1 / (1 + e^{-∫:u²:})`.
pub fn sigmoid_mass(ctx: &WickContext, x: &PairField) -> f64 {
    1.0 / (1.0 + (-ctx.wick_mass(&x.u)).exp())
}

#[derive(Clone, Debug)]
pub struct GirsanovOutcome {
    pub report: GirsanovReport,
    pub epsilon0: Epsilon0Estimate,
    pub max_martingale_defect: f64,
    pub max_cm_energy: f64,
}

/// Weighted shifted runs against plain runs from `u₀ + v₀`, observable
/// [`sigmoid_mass`] at `t_final`.
pub fn girsanov_experiment(cfg: &CouplingConfig) -> Result<GirsanovOutcome> {
    let u0 = gibbs_initial(cfg)?;
    let records = fixed_a_records(cfg, &u0, cfg.v0_norm)?;
    let ctx = WickContext::new(cfg.spec)?;
    let shifted: Vec<(f64, f64)> = records.iter().map(|r| (sigmoid_mass(&ctx, &r.shifted()), r.exp_mart)).collect();

    let integ = Integrator::from_interaction(ctx.clone(), &cfg.interaction, cfg.dt)?;
    let steps = integ.steps_for(cfg.t_final)?;
    let start = &u0 + &cfg.shift(cfg.v0_norm);
    let direct: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let stream = streams::direct(i);
            let mut rng = stream_rng(cfg.seed, stream);
            let mut x = start.clone();
            for s in 0..steps {
                x = integ.step(&x, s as f64 * cfg.dt, &mut rng).map_err(tag(cfg.seed, stream))?;
            }
            Ok(sigmoid_mass(&ctx, &x))
        })
        .collect::<Result<_>>()?;

    let report = girsanov_check(&shifted, &direct)?;
    let epsilon0 = epsilon0_estimate(&records, &cfg.etas)?;
    Ok(GirsanovOutcome {
        report,
        epsilon0,
        max_martingale_defect: records.iter().map(|r| r.martingale_defect()).fold(0.0, f64::max),
        max_cm_energy: records.iter().map(|r| r.cm_energy).fold(0.0, f64::max),
    })
}

/// Coupling-probability estimates for a sequence of shift sizes, all with the
/// same `u₀`, shift shape and noise streams.
pub fn epsilon0_sweep(cfg: &CouplingConfig, norms: &[f64]) -> Result<Vec<(f64, Epsilon0Estimate)>> {
    let u0 = gibbs_initial(cfg)?;
    norms.iter().map(|&v| Ok((v, epsilon0_estimate(&fixed_a_records(cfg, &u0, v)?, &cfg.etas)?))).collect()
}

use rayon::prelude::*;

use super::stats::{agree, batch_means, Summary};
use super::{stream_rng, streams, tag};
use crate::dynamics::{Increments, Integrator};
use crate::error::Result;
use crate::gibbs::{ChainSchedule, GibbsChain};
use crate::spectral::{sobolev, PairField, TorusSpec};
use crate::wick::{Polynomial, WickContext};

/// Gibbs-invariance test of the truncated dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceConfig {
    pub spec: TorusSpec,
    pub interaction: Polynomial,
    pub dt: f64,
    pub t_final: f64,
    pub ensemble: usize,
    pub chain: ChainSchedule,
    pub beta: f64,
    /// Multiplies `σ_N²` in the dynamics only; `1` is the correct model and
    /// any other value is a negative control.
    pub sigma2_factor: f64,
    /// Batches for the batch-means standard error.
    pub batches: usize,
    pub seed: u64,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            spec: TorusSpec::dealiased(8, 0.1, 4).expect("valid default spec"),
            interaction: Polynomial::monomial(4, 0.25),
            dt: 0.01,
            t_final: 5.0,
            ensemble: 400,
            chain: ChainSchedule { burn_in: 10_000, thin: 10, target_accept: 0.3, tune: true },
            beta: 0.5,
            sigma2_factor: 1.0,
            batches: 20,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservableComparison {
    pub name: &'static str,
    pub initial: Summary,
    pub terminal: Summary,
    pub terminal_halved: Summary,
    /// `|m_T(dt) - m_T(dt/2)|`.
    pub bias: f64,
    /// `3·√(se₀² + se_T²) + bias`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub rows: Vec<ObservableComparison>,
    pub pass: bool,
    pub beta: f64,
    pub acceptance: f64,
}

/// Draws `count` thinned states from a pCN chain targeting the Gibbs measure,
/// on stream [`streams::CHAIN`]. Returns the states with the tuned step and
/// post-burn-in acceptance rate.
pub fn gibbs_ensemble(
    spec: &TorusSpec,
    interaction: &Polynomial,
    schedule: &ChainSchedule,
    beta: f64,
    count: usize,
    seed: u64,
) -> Result<(Vec<PairField>, f64, f64)> {
    let mut rng = stream_rng(seed, streams::CHAIN);
    let ctx = WickContext::new(*spec)?;
    let mut chain = GibbsChain::new(ctx, interaction.clone(), beta, &mut rng)?;
    let samples = chain.run(schedule, count, &mut rng)?;
    let st = chain.state();
    Ok((samples, st.beta, st.acceptance_rate()))
}

const NAMES: [&str; 3] = ["wick_mass", "energy", "norm_neg"];

fn observables(measure: &Integrator, x: &PairField) -> Result<[f64; 3]> {
    let o = measure.observe(x, 0.0)?;
    Ok([o.wick_mass, o.energy, sobolev(x, -measure.context().spec().epsilon)])
}

fn evolve(dynamics: &Integrator, x0: &PairField, steps: usize, seed: u64, stream: u64) -> Result<PairField> {
    let mut rng = stream_rng(seed, stream);
    let mut x = x0.clone();
    for i in 0..steps {
        let inc: Increments = dynamics.propagator().sample(&mut rng);
        x = dynamics.step_with(&x, &inc, None, i as f64 * dynamics.dt()).map_err(tag(seed, stream))?;
    }
    Ok(x)
}

/// Evolves a Gibbs ensemble to `T` at `dt` and `dt/2` and compares observable
/// means at `0` and `T`.
pub fn invariance_experiment(cfg: &InvarianceConfig) -> Result<InvarianceReport> {
    let (initial, beta, acceptance) =
        gibbs_ensemble(&cfg.spec, &cfg.interaction, &cfg.chain, cfg.beta, cfg.ensemble, cfg.seed)?;
    let measure = Integrator::from_interaction(WickContext::new(cfg.spec)?, &cfg.interaction, cfg.dt)?;
    let dyn_ctx = WickContext::with_sigma2(cfg.spec, measure.context().sigma2() * cfg.sigma2_factor)?;
    let dynamics = Integrator::new(dyn_ctx, cfg.interaction.derivative(), cfg.dt)?;
    let halved = dynamics.with_dt(cfg.dt / 2.0)?;
    let steps = dynamics.steps_for(cfg.t_final)?;

    let results: Vec<[[f64; 3]; 3]> = initial
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let a = observables(&measure, x0)?;
            let xt = evolve(&dynamics, x0, steps, cfg.seed, streams::path(i))?;
            let xh = evolve(&halved, x0, 2 * steps, cfg.seed, streams::halved(i))?;
            Ok([a, observables(&measure, &xt)?, observables(&measure, &xh)?])
        })
        .collect::<Result<_>>()?;

    let rows: Vec<ObservableComparison> = NAMES
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let col = |j: usize| -> Vec<f64> { results.iter().map(|r| r[j][k]).collect() };
            let initial = batch_means(&col(0), cfg.batches);
            let terminal = batch_means(&col(1), cfg.batches);
            let terminal_halved = batch_means(&col(2), cfg.batches);
            let bias = (terminal.mean - terminal_halved.mean).abs();
            let threshold = 3.0 * initial.stderr.hypot(terminal.stderr) + bias;
            let pass = agree(&initial, &terminal, 3.0, bias);
            ObservableComparison { name, initial, terminal, terminal_halved, bias, threshold, pass }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(InvarianceReport { rows, pass, beta, acceptance })
}

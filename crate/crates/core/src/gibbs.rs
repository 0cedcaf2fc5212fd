//! Reference Gaussian measure ρ₀ and the truncated Gibbs measure
//! `ρ_N ∝ exp(-∫:P(u_N):) dρ₀`.
//!
//! Under ρ₀ the coefficients are independent with `E|û(n)|² = ⟨n⟩^{-2}/(4π²)`
//! and `E|ût(n)|² = 1/(4π²)`, subject to `û(-n) = conj(û(n))`. The Gibbs
//! density touches only `u`, so ρ_N keeps the Gaussian velocity marginal.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::spectral::{bracket_sq, half_modes, PairField, SpectralField, TorusSpec};
use crate::wick::{Polynomial, WickContext, RHO0_SCALE};

fn gaussian_field<R: Rng + ?Sized>(n_max: usize, rng: &mut R, amplitude: impl Fn(i64, i64) -> f64) -> SpectralField {
    let root = RHO0_SCALE.sqrt();
    let mut f = SpectralField::zeros(n_max);
    for (n1, n2) in half_modes(n_max) {
        let a = root * amplitude(n1, n2);
        if n1 == 0 && n2 == 0 {
            let g: f64 = rng.sample(StandardNormal);
            f.set_pair(0, 0, Complex64::new(a * g, 0.0));
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let s = a * std::f64::consts::FRAC_1_SQRT_2;
            f.set_pair(n1, n2, Complex64::new(s * re, s * im));
        }
    }
    f
}

/// Position marginal of ρ₀.
pub fn sample_rho0_u<R: Rng + ?Sized>(n_max: usize, rng: &mut R) -> SpectralField {
    gaussian_field(n_max, rng, |a, b| bracket_sq(a, b).sqrt().recip())
}

/// Velocity marginal of ρ₀ (spectrally white).
pub fn sample_rho0_ut<R: Rng + ?Sized>(n_max: usize, rng: &mut R) -> SpectralField {
    gaussian_field(n_max, rng, |_, _| 1.0)
}

/// One draw from ρ₀; `u` is drawn before `ut`.
pub fn sample_rho0<R: Rng + ?Sized>(spec: &TorusSpec, rng: &mut R) -> PairField {
    let u = sample_rho0_u(spec.n_max, rng);
    let ut = sample_rho0_ut(spec.n_max, rng);
    PairField { u, ut }
}

/// `∫ :P(u): dx`, evaluated by grid quadrature. The mean of the degree-`2k`
/// product is alias-free on a dealiased grid.
pub fn gibbs_potential(u: &SpectralField, ctx: &WickContext, interaction: &Polynomial) -> Result<f64> {
    if interaction.is_zero() {
        return Ok(0.0);
    }
    let g = ctx.to_grid(u)?;
    Ok(ctx.wick_poly_grid(interaction, &g)?.integrate())
}

/// Current state of a preconditioned Crank–Nicolson chain.
#[derive(Clone, Debug)]
pub struct GibbsChainState {
    pub current: PairField,
    /// `gibbs_potential(current.u)`.
    pub potential: f64,
    /// Proposal step `β ∈ (0, 1]`; `β = 0` is allowed and freezes `u`.
    pub beta: f64,
    pub accept_count: u64,
    pub step_count: u64,
}

impl GibbsChainState {
    pub fn new(current: PairField, ctx: &WickContext, interaction: &Polynomial, beta: f64) -> Result<Self> {
        let potential = gibbs_potential(&current.u, ctx, interaction)?;
        Ok(Self { current, potential, beta, accept_count: 0, step_count: 0 })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.step_count as f64
        }
    }
}

/// One pCN step for ρ_N with ρ₀ as reference: proposal
/// `u' = √(1-β²) u + β ξ`, acceptance `min(1, exp(V(u) - V(u')))`. On
/// acceptance the velocity is redrawn from its Gaussian marginal. Returns
/// whether the proposal was accepted.
pub fn pcn_step<R: Rng + ?Sized>(
    state: &mut GibbsChainState,
    ctx: &WickContext,
    interaction: &Polynomial,
    rng: &mut R,
) -> Result<bool> {
    let n_max = ctx.spec().n_max;
    let xi = sample_rho0_u(n_max, rng);
    let uniform: f64 = rng.random();
    let beta = state.beta;
    let mut proposal = state.current.u.scale((1.0 - beta * beta).max(0.0).sqrt());
    proposal.axpy(beta, &xi);
    let v_new = gibbs_potential(&proposal, ctx, interaction)?;
    let log_ratio = state.potential - v_new;
    let accept = log_ratio >= 0.0 || uniform.ln() < log_ratio;
    state.step_count += 1;
    if accept {
        state.accept_count += 1;
        state.current.u = proposal;
        state.current.ut = sample_rho0_ut(n_max, rng);
        state.potential = v_new;
    }
    Ok(accept)
}

/// Tuning and thinning schedule for [`GibbsChain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSchedule {
    pub burn_in: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub tune: bool,
}

impl Default for ChainSchedule {
    fn default() -> Self {
        Self { burn_in: 10_000, thin: 10, target_accept: 0.3, tune: true }
    }
}

/// A single sequential pCN chain targeting ρ_N.
#[derive(Clone, Debug)]
pub struct GibbsChain {
    ctx: WickContext,
    interaction: Polynomial,
    state: GibbsChainState,
}

impl GibbsChain {
    /// Starts the chain at a draw from ρ₀.
    pub fn new<R: Rng + ?Sized>(ctx: WickContext, interaction: Polynomial, beta: f64, rng: &mut R) -> Result<Self> {
        interaction.validate_interaction(ctx.spec().two_k)?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(crate::Error::InvalidParameter(format!("beta = {beta} not in [0, 1]")));
        }
        let start = sample_rho0(ctx.spec(), rng);
        let state = GibbsChainState::new(start, &ctx, &interaction, beta)?;
        Ok(Self { ctx, interaction, state })
    }

    pub fn state(&self) -> &GibbsChainState {
        &self.state
    }

    pub fn context(&self) -> &WickContext {
        &self.ctx
    }

    pub fn interaction(&self) -> &Polynomial {
        &self.interaction
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        pcn_step(&mut self.state, &self.ctx, &self.interaction, rng)
    }

    /// Burn-in; when `tune` is set, `log β` follows a Robbins–Monro recursion
    /// toward the target acceptance and is frozen afterwards. Counters are
    /// reset at the end so reported rates cover post-burn-in steps only.
    pub fn burn_in<R: Rng + ?Sized>(&mut self, schedule: &ChainSchedule, rng: &mut R) -> Result<()> {
        for i in 0..schedule.burn_in {
            let accepted = self.step(rng)?;
            if schedule.tune {
                let gain = ((i + 1) as f64).powf(-0.6);
                let signal = if accepted { 1.0 } else { 0.0 } - schedule.target_accept;
                self.state.beta = (self.state.beta.ln() + gain * signal).exp().clamp(1e-3, 1.0);
            }
        }
        self.state.accept_count = 0;
        self.state.step_count = 0;
        Ok(())
    }

    /// `count` thinned samples after the chain has been burned in.
    pub fn samples<R: Rng + ?Sized>(&mut self, count: usize, thin: usize, rng: &mut R) -> Result<Vec<PairField>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..thin.max(1) {
                self.step(rng)?;
            }
            out.push(self.state.current.clone());
        }
        Ok(out)
    }

    /// Runs burn-in then collects thinned samples.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        schedule: &ChainSchedule,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<PairField>> {
        self.burn_in(schedule, rng)?;
        self.samples(count, schedule.thin, rng)
    }
}

/// Self-normalized importance-sampling estimate of ρ_N expectations from
/// independent ρ₀ draws weighted by `exp(-∫:P(u):)`.
#[derive(Clone, Debug)]
pub struct ImportanceEstimate {
    pub means: Vec<f64>,
    /// Delta-method standard errors of the ratio estimators.
    pub stderrs: Vec<f64>,
    pub effective_sample_size: f64,
}

pub fn importance_estimate<R: Rng + ?Sized>(
    ctx: &WickContext,
    interaction: &Polynomial,
    observables: &[&dyn Fn(&PairField) -> f64],
    draws: usize,
    rng: &mut R,
) -> Result<ImportanceEstimate> {
    let mut log_w = Vec::with_capacity(draws);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); observables.len()];
    for _ in 0..draws {
        let x = sample_rho0(ctx.spec(), rng);
        log_w.push(-gibbs_potential(&x.u, ctx, interaction)?);
        for (k, f) in observables.iter().enumerate() {
            values[k].push(f(&x));
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for vals in &values {
        let mu = w.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>() / sw;
        let var = w.iter().zip(vals).map(|(a, b)| a * a * (b - mu) * (b - mu)).sum::<f64>();
        means.push(mu);
        stderrs.push(var.sqrt() / sw);
    }
    Ok(ImportanceEstimate { means, stderrs, effective_sample_size: sw * sw / sw2 })
}

//! Girsanov coupling of trajectories started from `u₀` and `u₀ + v₀`.
//!
//! Along a reference trajectory `r = Φ_t(u₀; ξ)` the difference `w` solves
//! `w_tt + w_t + (1-Δ)w = -Σ_h (1 - e^{δΔ}) :p_h(r): w^h` with `w(0) = v₀`,
//! which makes `r + w` the solution from `u₀ + v₀` driven by `ξ + h`, where
//! `h = 2^{-1/2} Σ_h e^{δΔ}(:p_h(r):) w^h`. The shift is stopped once
//! `∫‖h‖²` reaches `M²`. Its likelihood weight is
//! `E(h) = exp(-½∫‖h‖² - ∫⟨h, dW⟩)`.

use rand::Rng;

use crate::dynamics::{adapted_norm, Increments, Integrator};
use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, sobolev, wsp, Collocation, PairField, RealGrid, SpectralField, AREA};
use crate::wick::Polynomial;

/// `δ = (A · sup)^{-4/ε}`; a vanishing `sup` gives `+∞` (keep only means).
pub fn delta_of_t(sup_wsp: f64, a: f64, epsilon: f64) -> f64 {
    if sup_wsp <= 0.0 {
        return f64::INFINITY;
    }
    (a * sup_wsp).powf(-4.0 / epsilon)
}

/// `e^{δΔ}` on the grid with exact shortcuts for `δ → 0` and `δ = ∞`.
fn smooth(col: &Collocation, g: &RealGrid, delta: f64) -> Result<RealGrid> {
    let m = col.size() as f64;
    if delta * m * m < 1e-18 {
        return Ok(g.clone());
    }
    if delta.is_infinite() {
        let mean = g.values().iter().sum::<f64>() / (m * m);
        return Ok(g.map(|_| mean));
    }
    col.grid_heat_smooth(g, delta)
}

/// A random smooth shift `v₀` supported on `|n|_∞ ≤ 2`, scaled so that
/// `‖v₀‖_{ℋ^{1-ε}} = norm`.
pub fn smooth_shift<R: Rng + ?Sized>(n_max: usize, epsilon: f64, norm: f64, rng: &mut R) -> PairField {
    let low = 2.min(n_max as i64);
    let mut draw = |n1: i64, n2: i64| {
        if n1.abs() > low || n2.abs() > low {
            return num_complex::Complex64::new(0.0, 0.0);
        }
        let re: f64 = rng.random::<f64>() - 0.5;
        let im: f64 = if n1 == 0 && n2 == 0 { 0.0 } else { rng.random::<f64>() - 0.5 };
        num_complex::Complex64::new(re, im) / bracket_sq(n1, n2)
    };
    let u = SpectralField::from_fn(n_max, &mut draw);
    let ut = SpectralField::from_fn(n_max, &mut draw);
    let pair = PairField { u, ut };
    let current = sobolev(&pair, 1.0 - epsilon);
    if current == 0.0 || norm == 0.0 {
        return PairField::zeros(n_max);
    }
    pair.scale(norm / current)
}

/// Coupling controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingParams {
    /// Initial damping constant `A`.
    pub a: f64,
    /// Stop level `M`: the shift is switched off once `∫‖h‖² = M²`.
    pub stop_level: f64,
    /// Maximum number of doublings of `A`.
    pub max_doublings: u32,
    /// Record stride in steps.
    pub stride: usize,
    /// Keep the per-step shifts for replay.
    pub keep_shifts: bool,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self { a: 1.0, stop_level: 3.0, max_doublings: 12, stride: 10, keep_shifts: false }
    }
}

/// One recorded point of a coupling run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSample {
    pub t: f64,
    /// `‖w‖_{ℋ^{1-ε}}`.
    pub w_norm: f64,
    /// [`adapted_norm`] of `w` at `1-ε`.
    pub w_adapted: f64,
    pub cm_energy: f64,
    pub exp_mart: f64,
}

/// State and history of one coupling run.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRecord {
    pub w: PairField,
    pub reference: PairField,
    /// `∫₀ᵗ ‖h‖²_{L²}`.
    pub cm_energy: f64,
    /// `∫₀ᵗ ⟨h, dW⟩` against the driving increments.
    pub ito_integral: f64,
    /// `exp(-½ cm_energy - ito_integral)`.
    pub exp_mart: f64,
    pub tau_hit: Option<f64>,
    pub delta_history: Vec<(f64, f64)>,
    pub a: f64,
    pub samples: Vec<CouplingSample>,
    /// Per-step shifts `ĥ`, kept when requested.
    pub shifts: Vec<SpectralField>,
    pub t: f64,
}

impl CouplingRecord {
    pub fn new(reference: PairField, w: PairField, a: f64) -> Self {
        Self {
            w,
            reference,
            cm_energy: 0.0,
            ito_integral: 0.0,
            exp_mart: 1.0,
            tau_hit: None,
            delta_history: Vec::new(),
            a,
            samples: Vec::new(),
            shifts: Vec::new(),
            t: 0.0,
        }
    }

    /// `r + w`, the state of the shifted run.
    pub fn shifted(&self) -> PairField {
        &self.reference + &self.w
    }

    /// Largest defect of `exp_mart = exp(-½ cm_energy - ito)` relative to
    /// `exp_mart`.
    pub fn martingale_defect(&self) -> f64 {
        let want = (-0.5 * self.cm_energy - self.ito_integral).exp();
        (self.exp_mart - want).abs() / want.max(f64::MIN_POSITIVE)
    }
}

/// Reference dynamics together with the Taylor family `p_h` of `p`.
#[derive(Clone, Debug)]
pub struct Coupler {
    integ: Integrator,
    family: Vec<Polynomial>,
    v0_norm: f64,
}

impl Coupler {
    pub fn new(integ: Integrator, v0_norm: f64) -> Result<Self> {
        let p = integ.nonlinearity();
        let family = if p.degree() >= 1 { p.taylor_shift()? } else { Vec::new() };
        Ok(Self { integ, family, v0_norm })
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integ
    }

    fn record_sample(&self, rec: &mut CouplingRecord) {
        let s = 1.0 - self.integ.context().spec().epsilon;
        rec.samples.push(CouplingSample {
            t: rec.t,
            w_norm: sobolev(&rec.w, s),
            w_adapted: adapted_norm(&rec.w, s),
            cm_energy: rec.cm_energy,
            exp_mart: rec.exp_mart,
        });
    }

    /// Advances reference and difference by one step with shared noise.
    pub fn coupled_step(&self, rec: &mut CouplingRecord, inc: &Increments, params: &CouplingParams) -> Result<()> {
        let ctx = self.integ.context();
        let col = ctx.grid();
        let eps = ctx.spec().epsilon;
        let dt = self.integ.dt();
        let n_max = ctx.spec().n_max;

        let mut residual = SpectralField::zeros(n_max);
        let mut shift = SpectralField::zeros(n_max);
        if !self.family.is_empty() {
            let rg = ctx.to_grid(&rec.reference.u)?;
            let wg = ctx.to_grid(&rec.w.u)?;
            let mut terms = Vec::with_capacity(self.family.len());
            let mut sup: f64 = 0.0;
            for (i, ph) in self.family.iter().enumerate() {
                let a = ctx.wick_poly_grid(ph, &rg)?;
                let norm = wsp(&ctx.project(&a), -eps / 2.0, 4.0, col)?;
                sup = sup.max(norm * self.v0_norm.powi(i as i32));
                terms.push(a);
            }
            let delta = delta_of_t(sup, rec.a, eps);
            rec.delta_history.push((rec.t, delta));
            let mut full = RealGrid::zeros(col.size());
            let mut kept = RealGrid::zeros(col.size());
            let active = rec.tau_hit.is_none();
            for (i, a) in terms.iter().enumerate() {
                let power = (i + 1) as i32;
                let wp = wg.map(|x| x.powi(power));
                full = full.zip_map(&a.zip_map(&wp, |x, y| x * y), |s, v| s + v);
                if active {
                    let sm = smooth(col, a, delta)?;
                    kept = kept.zip_map(&sm.zip_map(&wp, |x, y| x * y), |s, v| s + v);
                }
            }
            residual = ctx.project(&full);
            if active {
                shift = ctx.project(&kept).scale(std::f64::consts::FRAC_1_SQRT_2);
            }
        }

        if rec.tau_hit.is_none() {
            let cap = params.stop_level * params.stop_level;
            let mut gain = AREA * shift.coeff_norm_sq() * dt;
            if rec.cm_energy + gain >= cap && gain > 0.0 {
                let factor = ((cap - rec.cm_energy).max(0.0) / gain).sqrt();
                shift = shift.scale(factor);
                gain = cap - rec.cm_energy;
                rec.tau_hit = Some(rec.t + dt);
            }
            let ito: f64 =
                shift.coeffs().iter().zip(inc.dw.coeffs()).map(|(h, w)| (h * w.conj()).re).sum::<f64>() * AREA;
            rec.cm_energy = if rec.tau_hit.is_some() { cap } else { rec.cm_energy + gain };
            rec.ito_integral += ito;
            rec.exp_mart = (-0.5 * rec.cm_energy - rec.ito_integral).exp();
        }

        let prop = self.integ.propagator();
        let next_ref = self.integ.step_with(&rec.reference, inc, None, rec.t)?;
        let mut next_w = prop.transfer(&rec.w)?;
        prop.add_forcing(&mut next_w, -1.0, &residual)?;
        prop.add_forcing(&mut next_w, std::f64::consts::SQRT_2, &shift)?;
        self.integ.check_blowup(&next_w, rec.t + dt)?;
        if params.keep_shifts {
            rec.shifts.push(shift);
        }
        rec.reference = next_ref;
        rec.w = next_w;
        rec.t += dt;
        Ok(())
    }

    /// One attempt at a fixed `A`, drawing noise from `rng`.
    pub fn run_once<R: Rng + ?Sized>(
        &self,
        u0: &PairField,
        v0: &PairField,
        steps: usize,
        a: f64,
        params: &CouplingParams,
        rng: &mut R,
    ) -> Result<CouplingRecord> {
        let mut rec = CouplingRecord::new(u0.clone(), v0.clone(), a);
        let stride = params.stride.max(1);
        self.record_sample(&mut rec);
        for i in 0..steps {
            let inc = self.integ.propagator().sample(rng);
            self.coupled_step(&mut rec, &inc, params)?;
            if (i + 1) % stride == 0 {
                self.record_sample(&mut rec);
            }
        }
        Ok(rec)
    }
}

/// First recorded time at which `‖w‖ > bound · ‖v₀‖ e^{-t/4}` in the adapted
/// norm, if any.
pub fn envelope_violation(rec: &CouplingRecord) -> Option<f64> {
    let v0 = rec.samples.first()?.w_adapted;
    rec.samples.iter().find(|s| s.w_adapted > v0 * (-0.25 * s.t).exp() * (1.0 + 1e-12) + 1e-300).map(|s| s.t)
}

/// Same test in the plain `ℋ^{1-ε}` norm with envelope constant `constant`.
pub fn sobolev_envelope_holds(rec: &CouplingRecord, constant: f64) -> bool {
    let Some(first) = rec.samples.first() else { return true };
    let v0 = first.w_norm;
    rec.samples.iter().all(|s| s.w_norm <= constant * v0 * (-0.25 * s.t).exp() * (1.0 + 1e-12) + 1e-300)
}

/// Runs the coupling over `[0, t_final]`, doubling `A` and replaying the same
/// noise until the adapted-norm envelope `‖w(t)‖ ≤ ‖v₀‖e^{-t/4}` holds on
/// every recorded time.
pub fn run_coupling<R: Rng + Clone>(
    coupler: &Coupler,
    u0: &PairField,
    v0: &PairField,
    t_final: f64,
    params: &CouplingParams,
    rng: &R,
) -> Result<CouplingRecord> {
    let steps = coupler.integrator().steps_for(t_final)?;
    let mut a = params.a;
    let mut last_t = 0.0;
    for _ in 0..=params.max_doublings {
        let mut noise = rng.clone();
        match coupler.run_once(u0, v0, steps, a, params, &mut noise) {
            Ok(rec) => match envelope_violation(&rec) {
                None => return Ok(rec),
                Some(t) => last_t = t,
            },
            Err(Error::BlowUp { t }) => last_t = t,
            Err(e) => return Err(e),
        }
        a *= 2.0;
    }
    Err(Error::NonContraction { a: a / 2.0, t: last_t })
}

/// Replays the reference noise with the recorded shifts from `u₀ + v₀` and
/// returns the final state, which should equal `reference + w`.
pub fn replay_shifted<R: Rng + ?Sized>(
    coupler: &Coupler,
    start: &PairField,
    shifts: &[SpectralField],
    rng: &mut R,
) -> Result<PairField> {
    let integ = coupler.integrator();
    let mut x = start.clone();
    for (i, h) in shifts.iter().enumerate() {
        let inc = integ.propagator().sample(rng);
        x = integ.step_with(&x, &inc, Some(h), i as f64 * integ.dt())?;
    }
    Ok(x)
}

/// Mean and standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Outcome of the Girsanov consistency checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GirsanovReport {
    pub weight_mean: f64,
    pub weight_se: f64,
    /// `weight_mean ± 3·weight_se` contains 1.
    pub brackets_one: bool,
    pub reweighted_mean: f64,
    pub reweighted_se: f64,
    pub direct_mean: f64,
    pub direct_se: f64,
    /// Means agree within three combined standard errors.
    pub agree: bool,
    pub effective_sample_size: f64,
    /// Fewer than ten effective samples.
    pub degenerate: bool,
}

/// Compares `E[F(shifted) E(h)]` with `E[F]` along independent plain runs.
/// `shifted` holds `(F, E(h))` per coupled path.
pub fn girsanov_check(shifted: &[(f64, f64)], direct: &[f64]) -> Result<GirsanovReport> {
    if shifted.len() < 2 || direct.len() < 2 {
        return Err(Error::InvalidParameter("need at least two paths of each kind".into()));
    }
    let weights: Vec<f64> = shifted.iter().map(|p| p.1).collect();
    let products: Vec<f64> = shifted.iter().map(|p| p.0 * p.1).collect();
    let (wm, wse) = mean_se(&weights);
    let (rm, rse) = mean_se(&products);
    let (dm, dse) = mean_se(direct);
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = sw * sw / sw2;
    Ok(GirsanovReport {
        weight_mean: wm,
        weight_se: wse,
        brackets_one: (wm - 1.0).abs() <= 3.0 * wse || (wm == 1.0),
        reweighted_mean: rm,
        reweighted_se: rse,
        direct_mean: dm,
        direct_se: dse,
        agree: (rm - dm).abs() <= 3.0 * rse.hypot(dse) || rm == dm,
        effective_sample_size: ess,
        degenerate: ess < 10.0,
    })
}

/// Empirical coupling-probability constant for the pair `(v₀, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Epsilon0Estimate {
    /// `½ sup_t (E[E(h)·1{τ<t}] + E|E(h)·1{τ≥t} - 1|)`.
    pub estimate: f64,
    /// Standard error of the two expectations at the maximizing time.
    pub stderr: f64,
    /// `1 - ½ sup_η η inf_t P(E(h) ≥ η, τ ≥ t)`.
    pub eta_bound: f64,
    pub eta_star: f64,
    /// Fewer than 100 records.
    pub low_count: bool,
}

/// Plug-in estimate from coupling records sharing `u₀` and `v₀`; the second
/// shift is `v₁ = 0`, so its weight is identically one.
pub fn epsilon0_estimate(records: &[CouplingRecord], etas: &[f64]) -> Result<Epsilon0Estimate> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no coupling records".into()));
    }
    let times: Vec<f64> = records[0].samples.iter().map(|s| s.t).collect();
    if records.iter().any(|r| r.samples.len() != times.len()) {
        return Err(Error::InvalidParameter("records have different sampling grids".into()));
    }
    let n = records.len() as f64;
    let mut best = (0.0, 0.0);
    for (k, &t) in times.iter().enumerate() {
        let vals: Vec<f64> = records
            .iter()
            .map(|r| {
                let e = r.samples[k].exp_mart;
                let stopped = r.tau_hit.is_some_and(|tau| tau < t);
                if stopped {
                    e
                } else {
                    (e - 1.0).abs()
                }
            })
            .collect();
        let (m, se) = mean_se(&vals);
        if 0.5 * m > best.0 {
            best = (0.5 * m, 0.5 * se);
        }
    }
    let mut eta_best = (0.0, etas.first().copied().unwrap_or(0.0));
    for &eta in etas {
        let worst = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                records.iter().filter(|r| r.samples[k].exp_mart >= eta && !r.tau_hit.is_some_and(|tau| tau < t)).count()
                    as f64
                    / n
            })
            .fold(1.0, f64::min);
        if eta * worst > eta_best.0 {
            eta_best = (eta * worst, eta);
        }
    }
    Ok(Epsilon0Estimate {
        estimate: best.0.min(1.0),
        stderr: best.1,
        eta_bound: 1.0 - 0.5 * eta_best.0,
        eta_star: eta_best.1,
        low_count: records.len() < 100,
    })
}

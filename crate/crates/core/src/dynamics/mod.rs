//! Truncated damped stochastic wave dynamics
//! `u_tt + u_t + (1 - Δ) u + :p(u): = √2 ξ` and the parabolic cross-check
//! `u_t = -(1 - Δ) u - :p(u): + √2 ξ`.
//!
//! The linear part and its noise are integrated exactly per mode; the Wick
//! nonlinearity is frozen over each step (exponential Euler).

mod propagator;
mod sqe;

pub use propagator::{
    adapted_norm, apply_s, convolution_covariance, decay_constant, duhamel_matrix, mode_operator_norm, transfer_matrix,
    Increments, Mat2, ModePropagator, ModeStep,
};
pub use sqe::{sqe_step, SqePropagator};

use rand::Rng;

use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, h_norm, sobolev, PairField, SpectralField, AREA};
use crate::wick::{Polynomial, WickContext};

/// Threshold on `‖(u, u_t)‖_{ℋ^{-ε}}` past which a trajectory is declared
/// blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// `E(u, u_t) = a_{2k}/(2k) ∫u^{2k} + ½∫|∇u|² + ½∫u² + ½∫u_t²`, with `a_{2k}`
/// the coefficient of `x^{2k}` in `interaction`. Unrenormalized.
pub fn energy(pair: &PairField, interaction: &Polynomial, ctx: &WickContext) -> Result<f64> {
    let two_k = ctx.spec().two_k;
    let mut quadratic = 0.0;
    for (i, (a, b)) in pair.u.coeffs().iter().zip(pair.ut.coeffs()).enumerate() {
        let (n1, n2) = pair.u.mode_of(i);
        quadratic += bracket_sq(n1, n2) * a.norm_sqr() + b.norm_sqr();
    }
    let lead = interaction.coeff(two_k);
    let potential = if lead == 0.0 {
        0.0
    } else {
        let g = ctx.to_grid(&pair.u)?;
        lead / two_k as f64 * g.map(|v| v.powi(two_k as i32)).integrate()
    };
    Ok(potential + 0.5 * AREA * quadratic)
}

/// Diagnostics recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub energy: f64,
    /// `∫ :u²:`.
    pub wick_mass: f64,
    /// `‖:p(u):‖_{H^{-ε}}`.
    pub nonlinearity_norm: f64,
    /// `‖(u, u_t)‖_{ℋ^{-ε}}`.
    pub norm_neg: f64,
    /// `‖(u, u_t)‖_{ℋ^{1-ε}}`.
    pub norm_pos: f64,
}

impl ObservableRecord {
    pub fn is_finite(&self) -> bool {
        [self.energy, self.wick_mass, self.nonlinearity_norm, self.norm_neg, self.norm_pos]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Exponential-Euler integrator for the truncated wave equation.
#[derive(Clone, Debug)]
pub struct Integrator {
    prop: ModePropagator,
    ctx: WickContext,
    nonlinearity: Polynomial,
    interaction: Polynomial,
}

impl Integrator {
    /// Dynamics for the Gibbs measure of `interaction`, i.e. with `p = P'`.
    pub fn from_interaction(ctx: WickContext, interaction: &Polynomial, dt: f64) -> Result<Self> {
        interaction.validate_interaction(ctx.spec().two_k)?;
        Self::new(ctx, interaction.derivative(), dt)
    }

    /// Dynamics with an arbitrary nonlinearity of degree at most `2k-1`.
    pub fn new(ctx: WickContext, nonlinearity: Polynomial, dt: f64) -> Result<Self> {
        let max = ctx.spec().two_k - 1;
        if nonlinearity.degree() > max {
            return Err(Error::DegreeTooHigh { degree: nonlinearity.degree(), max });
        }
        let prop = ModePropagator::new(ctx.spec().n_max, dt)?;
        let interaction = nonlinearity.antiderivative();
        Ok(Self { prop, ctx, nonlinearity, interaction })
    }

    pub fn propagator(&self) -> &ModePropagator {
        &self.prop
    }

    pub fn context(&self) -> &WickContext {
        &self.ctx
    }

    pub fn nonlinearity(&self) -> &Polynomial {
        &self.nonlinearity
    }

    pub fn interaction(&self) -> &Polynomial {
        &self.interaction
    }

    pub fn dt(&self) -> f64 {
        self.prop.dt()
    }

    /// Same dynamics with a different step.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Ok(Self { prop: ModePropagator::new(self.ctx.spec().n_max, dt)?, ..self.clone() })
    }

    /// `π_N :p(u):`.
    pub fn force(&self, u: &SpectralField) -> Result<SpectralField> {
        if self.nonlinearity.is_zero() {
            return Ok(SpectralField::zeros(u.n_max()));
        }
        self.ctx.wick_poly(&self.nonlinearity, u)
    }

    /// One step from time `t` with the given noise and an optional noise
    /// shift `h`, i.e. driving `ξ + h` with `h` frozen over the step.
    pub fn step_with(
        &self,
        pair: &PairField,
        inc: &Increments,
        shift: Option<&SpectralField>,
        t: f64,
    ) -> Result<PairField> {
        let mut next = self.prop.ou_step_with(pair, inc)?;
        if !self.nonlinearity.is_zero() {
            self.prop.add_forcing(&mut next, -1.0, &self.force(&pair.u)?)?;
        }
        if let Some(h) = shift {
            self.prop.add_forcing(&mut next, std::f64::consts::SQRT_2, h)?;
        }
        self.check_blowup(&next, t + self.dt())?;
        Ok(next)
    }

    pub fn step<R: Rng + ?Sized>(&self, pair: &PairField, t: f64, rng: &mut R) -> Result<PairField> {
        let inc = self.prop.sample(rng);
        self.step_with(pair, &inc, None, t)
    }

    pub fn check_blowup(&self, pair: &PairField, t: f64) -> Result<()> {
        if !pair.is_finite() || sobolev(pair, -self.ctx.spec().epsilon) > BLOWUP_THRESHOLD {
            return Err(Error::BlowUp { t });
        }
        Ok(())
    }

    pub fn observe(&self, pair: &PairField, t: f64) -> Result<ObservableRecord> {
        let eps = self.ctx.spec().epsilon;
        Ok(ObservableRecord {
            t,
            energy: energy(pair, &self.interaction, &self.ctx)?,
            wick_mass: self.ctx.wick_mass(&pair.u),
            nonlinearity_norm: h_norm(&self.force(&pair.u)?, -eps),
            norm_neg: sobolev(pair, -eps),
            norm_pos: sobolev(pair, 1.0 - eps),
        })
    }

    /// Number of steps covering `[0, t_final]`.
    pub fn steps_for(&self, t_final: f64) -> Result<usize> {
        let n = (t_final / self.dt()).round();
        if !(t_final > 0.0) || (n * self.dt() - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidParameter(format!(
                "T = {t_final} is not a positive multiple of dt = {}",
                self.dt()
            )));
        }
        Ok(n as usize)
    }
}

/// Recorded trajectory. Intermediate states are kept only when requested;
/// the terminal state is always kept.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PairField>,
    pub observables: Vec<ObservableRecord>,
    pub terminal: Option<PairField>,
}

impl Trajectory {
    pub fn last_observables(&self) -> Option<&ObservableRecord> {
        self.observables.last()
    }
}

/// Integrates `steps` steps from `pair0`, drawing noise from `noise`, and
/// records observables at step 0 and every `stride` steps.
pub fn simulate_driven(
    integ: &Integrator,
    pair0: &PairField,
    steps: usize,
    stride: usize,
    keep_states: bool,
    mut noise: impl FnMut(&ModePropagator) -> Increments,
) -> Result<Trajectory> {
    let stride = stride.max(1);
    let dt = integ.dt();
    let mut traj = Trajectory::default();
    let mut x = pair0.clone();
    let record = |traj: &mut Trajectory, x: &PairField, t: f64| -> Result<()> {
        traj.times.push(t);
        traj.observables.push(integ.observe(x, t)?);
        if keep_states {
            traj.states.push(x.clone());
        }
        Ok(())
    };
    record(&mut traj, &x, 0.0)?;
    for i in 0..steps {
        let inc = noise(integ.propagator());
        x = integ.step_with(&x, &inc, None, i as f64 * dt)?;
        if (i + 1) % stride == 0 {
            record(&mut traj, &x, (i + 1) as f64 * dt)?;
        }
    }
    traj.terminal = Some(x);
    Ok(traj)
}

/// Integrates over `[0, t_final]` with fresh noise from `rng`.
pub fn simulate<R: Rng + ?Sized>(
    integ: &Integrator,
    pair0: &PairField,
    t_final: f64,
    stride: usize,
    keep_states: bool,
    rng: &mut R,
) -> Result<Trajectory> {
    let steps = integ.steps_for(t_final)?;
    simulate_driven(integ, pair0, steps, stride, keep_states, |p| p.sample(rng))
}

/// Da Prato–Debussche decomposition `u = X + v` along one noise realization:
/// `X(t) = S(t)u₀ + ψ(t)` solves the linear equation and `v` the remainder
/// equation with `:p(X + v):`, `v(0) = 0`.
#[derive(Clone, Debug, Default)]
pub struct DpdSplit {
    pub times: Vec<f64>,
    pub full: Vec<PairField>,
    pub linear: Vec<PairField>,
    pub remainder: Vec<PairField>,
}

impl DpdSplit {
    /// `max_t ‖u - (X + v)‖` in coefficient sup norm.
    pub fn consistency_defect(&self) -> f64 {
        self.full
            .iter()
            .zip(self.linear.iter().zip(&self.remainder))
            .map(|(u, (x, v))| u.max_abs_diff(&(x + v)))
            .fold(0.0, f64::max)
    }
}

pub fn dpd_split<R: Rng + ?Sized>(
    integ: &Integrator,
    pair0: &PairField,
    t_final: f64,
    stride: usize,
    rng: &mut R,
) -> Result<DpdSplit> {
    let steps = integ.steps_for(t_final)?;
    let stride = stride.max(1);
    let dt = integ.dt();
    let prop = integ.propagator();
    let mut u = pair0.clone();
    let mut x = pair0.clone();
    let mut v = PairField::zeros(pair0.n_max());
    let mut out = DpdSplit::default();
    let push = |out: &mut DpdSplit, t: f64, u: &PairField, x: &PairField, v: &PairField| {
        out.times.push(t);
        out.full.push(u.clone());
        out.linear.push(x.clone());
        out.remainder.push(v.clone());
    };
    push(&mut out, 0.0, &u, &x, &v);
    for i in 0..steps {
        let inc = prop.sample(rng);
        let t = i as f64 * dt;
        let sum = &x.u + &v.u;
        let force = integ.force(&sum)?;
        u = integ.step_with(&u, &inc, None, t)?;
        x = prop.ou_step_with(&x, &inc)?;
        let mut vn = prop.transfer(&v)?;
        prop.add_forcing(&mut vn, -1.0, &force)?;
        integ.check_blowup(&vn, t + dt)?;
        v = vn;
        if (i + 1) % stride == 0 {
            push(&mut out, (i + 1) as f64 * dt, &u, &x, &v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{TorusSpec, AREA};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(n: usize) -> WickContext {
        WickContext::new(TorusSpec::dealiased(n, 0.1, 4).unwrap()).unwrap()
    }

    #[test]
    fn energy_of_constants() {
        let c = ctx(3);
        let p = Polynomial::monomial(4, 1.0);
        assert_eq!(energy(&PairField::zeros(3), &p, &c).unwrap(), 0.0);
        let k = 0.7;
        let pair = PairField { u: SpectralField::constant(3, k), ut: SpectralField::zeros(3) };
        let want = AREA * (k.powi(4) / 4.0 + k * k / 2.0);
        assert!((energy(&pair, &p, &c).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_data_without_noise_stays_zero() {
        let integ = Integrator::from_interaction(ctx(4), &Polynomial::monomial(4, 0.25), 0.01).unwrap();
        let mut x = PairField::zeros(4);
        for i in 0..50 {
            x = integ.step_with(&x, &Increments::zeros(4), None, i as f64 * 0.01).unwrap();
        }
        assert_eq!(x, PairField::zeros(4));
    }

    #[test]
    fn zero_nonlinearity_is_ou_step() {
        let integ = Integrator::new(ctx(3), Polynomial::zero(), 0.05).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = a.clone();
        let x = PairField::zeros(3);
        let y = integ.step(&x, 0.0, &mut a).unwrap();
        let z = integ.propagator().ou_step(&x, &mut b).unwrap();
        assert_eq!(y, z);
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let integ = Integrator::new(ctx(2), Polynomial::zero(), 0.1).unwrap();
        let big = PairField { u: SpectralField::constant(2, 1e12), ut: SpectralField::zeros(2) };
        let err = integ.step_with(&big, &Increments::zeros(2), None, 0.3).unwrap_err();
        assert!(matches!(err, Error::BlowUp { t } if (t - 0.4).abs() < 1e-12));
    }

    #[test]
    fn dpd_pieces_add_up() {
        let integ = Integrator::from_interaction(ctx(4), &Polynomial::monomial(4, 0.25), 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = crate::gibbs::sample_rho0(integ.context().spec(), &mut rng);
        let split = dpd_split(&integ, &x0, 0.5, 10, &mut rng).unwrap();
        assert_eq!(split.remainder[0], PairField::zeros(4));
        assert!(split.consistency_defect() < 1e-10);
        assert_eq!(split.times.len(), 6);
    }

    #[test]
    fn rejects_bad_horizon() {
        let integ = Integrator::new(ctx(2), Polynomial::zero(), 0.3).unwrap();
        assert!(integ.steps_for(1.0).is_err());
        assert_eq!(integ.steps_for(0.9).unwrap(), 3);
    }
}

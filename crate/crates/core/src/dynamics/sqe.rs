use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, half_modes, SpectralField, AREA};
use crate::wick::{Polynomial, WickContext};

/// Per-mode exact Ornstein–Uhlenbeck factors for
/// `du = -⟨n⟩² u dt - :p(u): dt + √2 dW` at a fixed step.
#[derive(Clone, Debug)]
pub struct SqePropagator {
    n_max: usize,
    dt: f64,
    /// `e^{-⟨n⟩² dt}`.
    decay: Vec<f64>,
    /// `(1 - e^{-⟨n⟩² dt}) / ⟨n⟩²`.
    drift: Vec<f64>,
    /// `√((1 - e^{-2⟨n⟩² dt}) / ⟨n⟩²)`.
    noise_std: Vec<f64>,
}

impl SqePropagator {
    pub fn new(n_max: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        let template = SpectralField::zeros(n_max);
        let len = template.coeffs().len();
        let (mut decay, mut drift, mut noise_std) =
            (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
        for i in 0..len {
            let (n1, n2) = template.mode_of(i);
            let l = bracket_sq(n1, n2);
            decay.push((-l * dt).exp());
            drift.push(-(-l * dt).exp_m1() / l);
            noise_std.push((-(-2.0 * l * dt).exp_m1() / l).sqrt());
        }
        Ok(Self { n_max, dt, decay, drift, noise_std })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }
}

/// One exponential-Euler step of the parabolic equation. The linear part and
/// its Gaussian increment are exact; `:p(u):` is frozen over the step.
pub fn sqe_step<R: Rng + ?Sized>(
    field: &SpectralField,
    prop: &SqePropagator,
    ctx: &WickContext,
    nonlinearity: &Polynomial,
    rng: &mut R,
) -> Result<SpectralField> {
    if field.n_max() != prop.n_max {
        return Err(Error::CutoffMismatch(field.n_max(), prop.n_max));
    }
    let force =
        if nonlinearity.is_zero() { SpectralField::zeros(prop.n_max) } else { ctx.wick_poly(nonlinearity, field)? };
    let mut out = SpectralField::zeros(prop.n_max);
    for (i, z) in out.coeffs_mut().iter_mut().enumerate() {
        *z = field.coeffs()[i] * prop.decay[i] - force.coeffs()[i] * prop.drift[i];
    }
    let dc = (1.0 / AREA).sqrt();
    let half = (0.5 / AREA).sqrt();
    for (n1, n2) in half_modes(prop.n_max) {
        let i = out.index_of(n1, n2);
        let s = prop.noise_std[i];
        let noise = if n1 == 0 && n2 == 0 {
            Complex64::new(s * dc * rng.sample::<f64, _>(StandardNormal), 0.0)
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (s * half)
        };
        let z = out[(n1, n2)] + noise;
        out.set_pair(n1, n2, z);
    }
    if !out.is_finite() {
        return Err(Error::BlowUp { t: f64::NAN });
    }
    Ok(out)
}

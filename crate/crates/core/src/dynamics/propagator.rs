//! Exact per-mode solution operators of the damped Klein–Gordon system
//! `d(u, u_t) = A_n (u, u_t) dt + (0, √2 dW)`, `A_n = [[0, 1], [-⟨n⟩², -1]]`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, half_modes, PairField, SpectralField, AREA};

/// Real 2×2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Frequency `ω = √(⟨n⟩² - 1/4)` of a mode with `⟨n⟩² = lambda`.
fn frequency(lambda: f64) -> f64 {
    (lambda - 0.25).sqrt()
}

/// `E(t) = exp(t A)` for the mode with `⟨n⟩² = lambda`.
pub fn transfer_matrix(lambda: f64, t: f64) -> Mat2 {
    let w = frequency(lambda);
    let (s, c) = (w * t).sin_cos();
    let e = (-0.5 * t).exp();
    [[e * (c + s / (2.0 * w)), e * s / w], [-e * lambda * s / w, e * (c - s / (2.0 * w))]]
}

/// Below this value of `max(ω, 1)·t` the integrals `J` and `Q` are evaluated
/// by Gauss–Legendre quadrature instead of closed forms that cancel.
const SMALL_PHASE: f64 = 0.5;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn quadrature(t: f64, f: impl Fn(f64) -> Mat2) -> Mat2 {
    let mut acc = [[0.0; 2]; 2];
    for (x, w) in gauss_legendre(16) {
        let m = f(0.5 * t * (x + 1.0));
        for r in 0..2 {
            for c in 0..2 {
                acc[r][c] += 0.5 * t * w * m[r][c];
            }
        }
    }
    acc
}

fn is_small_phase(lambda: f64, t: f64) -> bool {
    frequency(lambda).max(1.0) * t < SMALL_PHASE
}

/// `J(t) = ∫₀ᵗ E(s) ds`, the Duhamel weight of a forcing frozen over the step.
pub fn duhamel_matrix(lambda: f64, t: f64) -> Mat2 {
    if is_small_phase(lambda, t) {
        return quadrature(t, |s| transfer_matrix(lambda, s));
    }
    let e = transfer_matrix(lambda, t);
    let d = [[e[0][0] - 1.0, e[0][1]], [e[1][0], e[1][1] - 1.0]];
    // A⁻¹ = (1/λ) [[-1, -1], [λ, 0]]
    [[-(d[0][0] + d[1][0]) / lambda, -(d[0][1] + d[1][1]) / lambda], [d[0][0], d[0][1]]]
}

/// Covariance `C(t) = 2∫₀ᵗ E(s) e₂ e₂ᵀ E(s)ᵀ ds` of the stochastic
/// convolution for unit-intensity noise; `C(∞) = diag(1/λ, 1)`.
pub fn convolution_covariance(lambda: f64, t: f64) -> Mat2 {
    if is_small_phase(lambda, t) {
        return quadrature(t, |s| {
            let e = transfer_matrix(lambda, s);
            let (a, b) = (e[0][1], e[1][1]);
            [[2.0 * a * a, 2.0 * a * b], [2.0 * a * b, 2.0 * b * b]]
        });
    }
    let w = frequency(lambda);
    let decay = (-t).exp();
    let (s2, c2) = (2.0 * w * t).sin_cos();
    let sin1 = (w * t).sin();
    let denom = 4.0 * lambda - 1.0;
    let one_minus = -(-t).exp_m1();
    let c11 = one_minus / lambda + decay * (-2.0 * w * s2 + c2 - 1.0) / (denom * lambda);
    let c12 = decay * sin1 * sin1 / (w * w);
    let c22 = one_minus + decay * (2.0 * w * s2 + c2 - 1.0) / denom;
    [[c11, c12], [c12, c22]]
}

/// Per-mode step matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeStep {
    /// `E(dt)`.
    pub transfer: Mat2,
    /// `J(dt)`.
    pub duhamel: Mat2,
    /// `Q = C(dt)`.
    pub noise_cov: Mat2,
    /// Lower Cholesky factor of the joint covariance of
    /// `(η_u, η_ut, ΔW)` for one real degree of freedom at unit intensity.
    joint_chol: [[f64; 3]; 3],
}

fn cholesky3(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

impl ModeStep {
    pub fn new(lambda: f64, dt: f64) -> Self {
        let transfer = transfer_matrix(lambda, dt);
        let duhamel = duhamel_matrix(lambda, dt);
        let noise_cov = convolution_covariance(lambda, dt);
        let r2 = std::f64::consts::SQRT_2;
        let (j12, j22) = (r2 * duhamel[0][1], r2 * duhamel[1][1]);
        let joint = [[noise_cov[0][0], noise_cov[0][1], j12], [noise_cov[1][0], noise_cov[1][1], j22], [j12, j22, dt]];
        Self { transfer, duhamel, noise_cov, joint_chol: cholesky3(joint) }
    }

    fn correlated(&self, z: [f64; 3]) -> [f64; 3] {
        let l = &self.joint_chol;
        [l[0][0] * z[0], l[1][0] * z[0] + l[1][1] * z[1], l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2]]
    }
}

/// Noise for one step: the exact stochastic-convolution increment `η` and the
/// Wiener increment `ΔW` it was built from, as coefficient fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    pub eta: PairField,
    pub dw: SpectralField,
}

impl Increments {
    pub fn zeros(n_max: usize) -> Self {
        Self { eta: PairField::zeros(n_max), dw: SpectralField::zeros(n_max) }
    }
}

/// Step tables for all modes `|n|_∞ ≤ N` at a fixed `dt`.
#[derive(Clone, Debug)]
pub struct ModePropagator {
    n_max: usize,
    dt: f64,
    modes: Vec<ModeStep>,
}

fn mode_apply(m: &Mat2, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (a * m[0][0] + b * m[0][1], a * m[1][0] + b * m[1][1])
}

impl ModePropagator {
    pub fn new(n_max: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        let template = SpectralField::zeros(n_max);
        let modes = (0..template.coeffs().len())
            .map(|i| {
                let (n1, n2) = template.mode_of(i);
                ModeStep::new(bracket_sq(n1, n2), dt)
            })
            .collect();
        Ok(Self { n_max, dt, modes })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode(&self, n1: i64, n2: i64) -> &ModeStep {
        let n = self.n_max as i64;
        &self.modes[((n1 + n) * (2 * n + 1) + (n2 + n)) as usize]
    }

    fn check(&self, pair: &PairField) -> Result<()> {
        if pair.n_max() != self.n_max {
            return Err(Error::CutoffMismatch(pair.n_max(), self.n_max));
        }
        Ok(())
    }

    /// `E(dt) x`.
    pub fn transfer(&self, pair: &PairField) -> Result<PairField> {
        self.check(pair)?;
        let mut out = pair.clone();
        for (i, m) in self.modes.iter().enumerate() {
            let (a, b) = mode_apply(&m.transfer, pair.u.coeffs()[i], pair.ut.coeffs()[i]);
            out.u.coeffs_mut()[i] = a;
            out.ut.coeffs_mut()[i] = b;
        }
        Ok(out)
    }

    /// `x += a J(dt) (0, f)`.
    pub fn add_forcing(&self, pair: &mut PairField, a: f64, force: &SpectralField) -> Result<()> {
        if force.n_max() != self.n_max {
            return Err(Error::CutoffMismatch(force.n_max(), self.n_max));
        }
        for (i, m) in self.modes.iter().enumerate() {
            let f = force.coeffs()[i] * a;
            pair.u.coeffs_mut()[i] += f * m.duhamel[0][1];
            pair.ut.coeffs_mut()[i] += f * m.duhamel[1][1];
        }
        Ok(())
    }

    /// Draws one step of noise. Three standard normals are consumed per real
    /// degree of freedom, in `half_modes` order (real part before imaginary).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Increments {
        let mut inc = Increments::zeros(self.n_max);
        let dc = (1.0 / AREA).sqrt();
        let half = (0.5 / AREA).sqrt();
        let draw = |rng: &mut R| -> [f64; 3] {
            [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
        };
        for (n1, n2) in half_modes(self.n_max) {
            let m = self.mode(n1, n2);
            if n1 == 0 && n2 == 0 {
                let x = m.correlated(draw(rng));
                inc.eta.u.set_pair(0, 0, Complex64::new(dc * x[0], 0.0));
                inc.eta.ut.set_pair(0, 0, Complex64::new(dc * x[1], 0.0));
                inc.dw.set_pair(0, 0, Complex64::new(dc * x[2], 0.0));
            } else {
                let re = m.correlated(draw(rng));
                let im = m.correlated(draw(rng));
                let z = |k: usize| Complex64::new(half * re[k], half * im[k]);
                inc.eta.u.set_pair(n1, n2, z(0));
                inc.eta.ut.set_pair(n1, n2, z(1));
                inc.dw.set_pair(n1, n2, z(2));
            }
        }
        inc
    }

    /// Exact step of the linear equation with the given noise.
    pub fn ou_step_with(&self, pair: &PairField, inc: &Increments) -> Result<PairField> {
        let mut out = self.transfer(pair)?;
        out.u += &inc.eta.u;
        out.ut += &inc.eta.ut;
        Ok(out)
    }

    pub fn ou_step<R: Rng + ?Sized>(&self, pair: &PairField, rng: &mut R) -> Result<PairField> {
        let inc = self.sample(rng);
        self.ou_step_with(pair, &inc)
    }
}

/// `S(t) x`, the noise-free linear flow.
pub fn apply_s(pair: &PairField, t: f64) -> Result<PairField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    let mut out = pair.clone();
    for i in 0..out.u.coeffs().len() {
        let (n1, n2) = out.u.mode_of(i);
        let e = transfer_matrix(bracket_sq(n1, n2), t);
        let (a, b) = mode_apply(&e, pair.u.coeffs()[i], pair.ut.coeffs()[i]);
        out.u.coeffs_mut()[i] = a;
        out.ut.coeffs_mut()[i] = b;
    }
    Ok(out)
}

/// Operator norm of `E(t)` on `ℋ^s` for the mode with `⟨n⟩² = lambda`
/// (independent of `s`).
pub fn mode_operator_norm(lambda: f64, t: f64) -> f64 {
    let e = transfer_matrix(lambda, t);
    let r = lambda.sqrt();
    let (a, b, c, d) = (e[0][0], r * e[0][1], e[1][0] / r, e[1][1]);
    let fro = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    (0.5 * (fro + (fro * fro - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// `sup ‖S(t)‖_{ℋ^s→ℋ^s} e^{t/2}` over the modes `|n|_∞ ≤ n_max` and the given times.
pub fn decay_constant(n_max: usize, times: &[f64]) -> f64 {
    let n = n_max as i64;
    let mut lambdas: Vec<i64> = Vec::new();
    for n1 in 0..=n {
        for n2 in 0..=n1 {
            lambdas.push(1 + n1 * n1 + n2 * n2);
        }
    }
    lambdas.sort_unstable();
    lambdas.dedup();
    let mut sup: f64 = 0.0;
    for &l in &lambdas {
        for &t in times {
            sup = sup.max(mode_operator_norm(l as f64, t) * (0.5 * t).exp());
        }
    }
    sup
}

/// Norm on `ℋ^s` equivalent to the phase-space Sobolev norm under which
/// `S(t)` contracts exactly like `e^{-t/2}`:
/// `4π² Σ ⟨n⟩^{2s-2} (⟨n⟩²|û|² + |ût|² + Re(û conj(ût)))`.
/// It lies between `1/√2` and `√(3/2)` times [`crate::spectral::sobolev`].
pub fn adapted_norm(pair: &PairField, s: f64) -> f64 {
    let mut sum = 0.0;
    for (i, (a, b)) in pair.u.coeffs().iter().zip(pair.ut.coeffs()).enumerate() {
        let (n1, n2) = pair.u.mode_of(i);
        let l = bracket_sq(n1, n2);
        sum += l.powf(s - 1.0) * (l * a.norm_sqr() + b.norm_sqr() + (a * b.conj()).re);
    }
    (AREA * sum).max(0.0).sqrt()
}

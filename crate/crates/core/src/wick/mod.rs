//! Hermite calculus and Wick renormalization at fixed spectral truncation.
//!
//! With `σ² = σ_N²` the pointwise variance of the truncated free field, the
//! Wick power `:uʲ:` is the projection of `H_j(u(x), σ²)`. All nonlinear
//! expressions are evaluated pointwise on the collocation grid of the
//! [`TorusSpec`] and projected back to `|n|_∞ ≤ N`; on a dealiased grid this
//! is exact for products of total degree up to `2k-1`.

mod polynomial;

pub use polynomial::{binomial, Polynomial};

use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, Collocation, RealGrid, SpectralField, TorusSpec, AREA};

/// Variance of a single Fourier coefficient of the free field relative to
/// `⟨n⟩^{-2}`: `E|û(n)|² = ⟨n⟩^{-2} / (4π²)`. The same constant normalizes
/// `σ_N²`, the reference sampler and the stationary law of the dynamics.
pub const RHO0_SCALE: f64 = 1.0 / AREA;

/// `H_n(x, σ²)` by the three-term recurrence `H_{n+1} = x H_n - n σ² H_{n-1}`.
pub fn hermite(n: usize, x: f64, sigma2: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for j in 1..n {
        let next = x * cur - j as f64 * sigma2 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of `H_0, …, H_{max_degree}` as polynomials in `x`, built with
/// the same recurrence on coefficient vectors.
pub fn hermite_table(max_degree: usize, sigma2: f64) -> Vec<Polynomial> {
    let mut raw: Vec<Vec<f64>> = vec![vec![1.0]];
    if max_degree >= 1 {
        raw.push(vec![0.0, 1.0]);
    }
    for j in 1..max_degree {
        let mut next = vec![0.0; j + 2];
        for (i, c) in raw[j].iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in raw[j - 1].iter().enumerate() {
            next[i] -= j as f64 * sigma2 * c;
        }
        raw.push(next);
    }
    raw.into_iter().map(Polynomial::new).collect()
}

/// `σ_N² = (4π²)^{-1} Σ_{|n|_∞ ≤ N} ⟨n⟩^{-2}`.
pub fn sigma_n(spec: &TorusSpec) -> f64 {
    sigma_n_cutoff(spec.n_max)
}

pub fn sigma_n_cutoff(n_max: usize) -> f64 {
    let n = n_max as i64;
    let mut sum = 0.0;
    for n1 in -n..=n {
        for n2 in -n..=n {
            sum += 1.0 / bracket_sq(n1, n2);
        }
    }
    RHO0_SCALE * sum
}

/// Truncation data plus cached Hermite tables for Wick products.
#[derive(Clone, Debug)]
pub struct WickContext {
    spec: TorusSpec,
    sigma2: f64,
    grid: Collocation,
    hermite: Vec<Polynomial>,
}

impl WickContext {
    pub fn new(spec: TorusSpec) -> Result<Self> {
        Self::with_sigma2(spec, sigma_n(&spec))
    }

    /// Context with an explicit renormalization constant. Only useful for
    /// the unrenormalized limit (`σ² = 0`) and for negative controls.
    pub fn with_sigma2(spec: TorusSpec, sigma2: f64) -> Result<Self> {
        if !spec.is_dealiased() {
            return Err(Error::InvalidSpec(format!(
                "grid M = {} must exceed 2kN = {} for dealiased Wick products",
                spec.grid,
                spec.two_k * spec.n_max
            )));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be >= 0")));
        }
        Ok(Self { spec, sigma2, grid: Collocation::for_spec(&spec), hermite: hermite_table(spec.two_k, sigma2) })
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn grid(&self) -> &Collocation {
        &self.grid
    }

    pub fn hermite_poly(&self, j: usize) -> Result<&Polynomial> {
        self.hermite.get(j).ok_or(Error::DegreeTooHigh { degree: j, max: self.spec.two_k })
    }

    /// Rewrites `q = Σ a_j xʲ` as the ordinary polynomial `Σ a_j H_j(x, σ²)`.
    pub fn wick_order(&self, q: &Polynomial) -> Result<Polynomial> {
        let mut out = Polynomial::zero();
        for (j, &a) in q.coeffs().iter().enumerate() {
            if a != 0.0 {
                out = out.add(&self.hermite_poly(j)?.scale(a));
            }
        }
        Ok(out)
    }

    pub fn to_grid(&self, u: &SpectralField) -> Result<RealGrid> {
        self.check_cutoff(u)?;
        self.grid.to_grid_unchecked(u)
    }

    pub fn project(&self, g: &RealGrid) -> SpectralField {
        self.grid.from_grid(g, self.spec.n_max)
    }

    fn check_cutoff(&self, u: &SpectralField) -> Result<()> {
        if u.n_max() != self.spec.n_max {
            return Err(Error::CutoffMismatch(u.n_max(), self.spec.n_max));
        }
        Ok(())
    }

    /// Pointwise `:q:(u(x))` on the grid, without projection.
    pub fn wick_poly_grid(&self, q: &Polynomial, u: &RealGrid) -> Result<RealGrid> {
        let ordered = self.wick_order(q)?;
        Ok(u.map(|x| ordered.eval(x)))
    }

    /// `∫ :u²: dx = ‖u‖²_{L²} - 4π² σ²`.
    pub fn wick_mass(&self, u: &SpectralField) -> f64 {
        AREA * (u.coeff_norm_sq() - self.sigma2)
    }

    /// `π_N H_j(u, σ_N²)`.
    pub fn wick_power(&self, u: &SpectralField, j: usize) -> Result<SpectralField> {
        self.wick_poly(&Polynomial::monomial(j, 1.0), u)
    }

    /// `π_N Σ_j a_j H_j(u, σ_N²)`.
    pub fn wick_poly(&self, q: &Polynomial, u: &SpectralField) -> Result<SpectralField> {
        let g = self.to_grid(u)?;
        Ok(self.project(&self.wick_poly_grid(q, &g)?))
    }

    /// `π_N Σ_{h=0}^{deg q} :q_h(u): vʰ` with `q_0 = q` and `q_h` the Taylor
    /// family; by the Hermite binomial identity this equals `:q(u+v):`.
    pub fn wick_shift_expand(&self, q: &Polynomial, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        let max = self.spec.two_k - 1;
        if q.degree() > max {
            return Err(Error::DegreeTooHigh { degree: q.degree(), max });
        }
        let ug = self.to_grid(u)?;
        let vg = self.to_grid(v)?;
        let mut total = self.wick_poly_grid(q, &ug)?;
        if q.degree() >= 1 {
            for (i, qh) in q.taylor_shift()?.iter().enumerate() {
                let h = (i + 1) as i32;
                let term = self.wick_poly_grid(qh, &ug)?;
                total = total.zip_map(&term.zip_map(&vg, |a, b| a * b.powi(h)), |acc, t| acc + t);
            }
        }
        Ok(self.project(&total))
    }
}

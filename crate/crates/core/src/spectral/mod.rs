//! Fourier-Galerkin representation of real fields on the torus
//! `T² = (ℝ/2πℤ)²`.
//!
//! A field is stored through its coefficients `û(n)` for `|n|_∞ ≤ N`, with
//! the unnormalized series convention `u(x) = Σ_n û(n) e^{i n·x}`. Integrals
//! carry the physical area `4π²`, so `‖u‖²_{L²} = 4π² Σ_n |û(n)|²`.

mod grid;
mod norms;

pub use grid::{Collocation, RealGrid};
pub use norms::{bessel, h_norm, heat_smooth, l2_norm, project, sobolev, wsp};

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Physical area of the torus.
pub const AREA: f64 = 4.0 * PI * PI;

/// Relative tolerance for the Hermitian-symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Truncation and discretization parameters shared by every field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusSpec {
    /// Spectral cutoff: modes with `|n|_∞ ≤ n_max` are retained.
    pub n_max: usize,
    /// Collocation points per dimension.
    pub grid: usize,
    /// Regularity parameter ε.
    pub epsilon: f64,
    /// Even degree `2k` of the interaction polynomial.
    pub two_k: usize,
}

impl TorusSpec {
    pub fn new(n_max: usize, grid: usize, epsilon: f64, two_k: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidSpec("cutoff N must be at least 1".into()));
        }
        if grid < 2 * n_max + 1 {
            return Err(Error::InvalidSpec(format!("grid M = {grid} must be at least 2N+1 = {}", 2 * n_max + 1)));
        }
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::InvalidSpec(format!("epsilon = {epsilon} not in (0, 1/2]")));
        }
        if two_k < 4 || !two_k.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!("2k = {two_k} must be even and >= 4")));
        }
        Ok(Self { n_max, grid, epsilon, two_k })
    }

    /// Spec whose grid is the smallest 5-smooth size that resolves degree
    /// `2k-1` products of band-limited fields without aliasing into `|n|_∞ ≤ N`.
    pub fn dealiased(n_max: usize, epsilon: f64, two_k: usize) -> Result<Self> {
        Self::new(n_max, smooth_size(two_k * n_max + 1), epsilon, two_k)
    }

    /// True when products of degree `2k-1` project back to `N` exactly.
    pub fn is_dealiased(&self) -> bool {
        self.grid > self.two_k * self.n_max
    }

    /// Number of coefficients per dimension, `2N+1`.
    pub fn side(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn num_modes(&self) -> usize {
        self.side() * self.side()
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn smooth_size(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("unbounded search")
}

/// `⟨n⟩² = 1 + |n|²`.
#[inline]
pub fn bracket_sq(n1: i64, n2: i64) -> f64 {
    1.0 + (n1 * n1 + n2 * n2) as f64
}

/// Fourier coefficients of a real field, `|n|_∞ ≤ N`, row-major over
/// `n1 ∈ -N..=N` (outer) and `n2 ∈ -N..=N` (inner).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n_max: usize) -> Self {
        let side = 2 * n_max + 1;
        Self { n_max, coeffs: vec![Complex64::new(0.0, 0.0); side * side] }
    }

    /// Constant field `c`.
    pub fn constant(n_max: usize, c: f64) -> Self {
        let mut f = Self::zeros(n_max);
        f[(0, 0)] = Complex64::new(c, 0.0);
        f
    }

    pub fn from_coeffs(n_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let side = 2 * n_max + 1;
        if coeffs.len() != side * side {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients for N = {n_max}, got {}",
                side * side,
                coeffs.len()
            )));
        }
        Ok(Self { n_max, coeffs })
    }

    /// Builds a field from a function of the mode, enforcing `û(-n) = conj(û(n))`
    /// by evaluating `f` on the half-plane only.
    pub fn from_fn(n_max: usize, mut f: impl FnMut(i64, i64) -> Complex64) -> Self {
        let mut field = Self::zeros(n_max);
        for (n1, n2) in half_modes(n_max) {
            field.set_pair(n1, n2, f(n1, n2));
        }
        field
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn index_of(&self, n1: i64, n2: i64) -> usize {
        let n = self.n_max as i64;
        debug_assert!(n1.abs() <= n && n2.abs() <= n);
        ((n1 + n) * (2 * n + 1) + (n2 + n)) as usize
    }

    /// Mode `(n1, n2)` stored at position `idx`.
    #[inline]
    pub fn mode_of(&self, idx: usize) -> (i64, i64) {
        let side = 2 * self.n_max + 1;
        let n = self.n_max as i64;
        ((idx / side) as i64 - n, (idx % side) as i64 - n)
    }

    /// Sets `û(n) = z` and `û(-n) = conj(z)`; the zero mode keeps only `Re z`.
    pub fn set_pair(&mut self, n1: i64, n2: i64, z: Complex64) {
        if n1 == 0 && n2 == 0 {
            self[(0, 0)] = Complex64::new(z.re, 0.0);
        } else {
            self[(n1, n2)] = z;
            self[(-n1, -n2)] = z.conj();
        }
    }

    /// Largest Hermitian defect `|û(-n) - conj(û(n))|` relative to the largest
    /// coefficient, together with the offending mode.
    pub fn hermitian_defect(&self) -> (f64, (i64, i64)) {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return (0.0, (0, 0));
        }
        let mut worst = (0.0, (0, 0));
        for (n1, n2) in half_modes(self.n_max) {
            let d = if n1 == 0 && n2 == 0 {
                self[(0, 0)].im.abs()
            } else {
                (self[(-n1, -n2)] - self[(n1, n2)].conj()).norm()
            };
            if d / scale > worst.0 {
                worst = (d / scale, (n1, n2));
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let (defect, (n1, n2)) = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { n1, n2, defect });
        }
        Ok(())
    }

    /// `Σ_n |û(n)|²`; multiply by [`AREA`] for the `L²` norm squared.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Point evaluation `u(x)` by direct summation.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (n1, n2) = self.mode_of(i);
                let phase = n1 as f64 * x1 + n2 as f64 * x2;
                c.re * phase.cos() - c.im * phase.sin()
            })
            .sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { n_max: self.n_max, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.n_max, other.n_max, "cutoff mismatch");
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Index<(i64, i64)> for SpectralField {
    type Output = Complex64;
    fn index(&self, (n1, n2): (i64, i64)) -> &Complex64 {
        &self.coeffs[self.index_of(n1, n2)]
    }
}

impl IndexMut<(i64, i64)> for SpectralField {
    fn index_mut(&mut self, (n1, n2): (i64, i64)) -> &mut Complex64 {
        let i = self.index_of(n1, n2);
        &mut self.coeffs[i]
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.axpy(-1.0, rhs);
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

/// Modes `n = 0` followed by one representative of every pair `{n, -n}`:
/// `n1 > 0`, or `n1 = 0` and `n2 > 0`.
pub fn half_modes(n_max: usize) -> impl Iterator<Item = (i64, i64)> {
    let n = n_max as i64;
    std::iter::once((0, 0)).chain(
        (-n..=n).flat_map(move |n1| (-n..=n).filter_map(move |n2| (n1 > 0 || (n1 == 0 && n2 > 0)).then_some((n1, n2)))),
    )
}

/// Phase-space state `(u, ∂ₜu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairField {
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl PairField {
    pub fn new(u: SpectralField, ut: SpectralField) -> Result<Self> {
        if u.n_max() != ut.n_max() {
            return Err(Error::CutoffMismatch(u.n_max(), ut.n_max()));
        }
        Ok(Self { u, ut })
    }

    pub fn zeros(n_max: usize) -> Self {
        Self { u: SpectralField::zeros(n_max), ut: SpectralField::zeros(n_max) }
    }

    pub fn n_max(&self) -> usize {
        self.u.n_max()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { u: self.u.scale(a), ut: self.ut.scale(a) }
    }

    pub fn axpy(&mut self, a: f64, other: &PairField) {
        self.u.axpy(a, &other.u);
        self.ut.axpy(a, &other.ut);
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.ut.is_finite()
    }

    pub fn max_abs_diff(&self, other: &PairField) -> f64 {
        self.u.max_abs_diff(&other.u).max(self.ut.max_abs_diff(&other.ut))
    }
}

impl Add<&PairField> for &PairField {
    type Output = PairField;
    fn add(self, rhs: &PairField) -> PairField {
        PairField { u: &self.u + &rhs.u, ut: &self.ut + &rhs.ut }
    }
}

impl Sub<&PairField> for &PairField {
    type Output = PairField;
    fn sub(self, rhs: &PairField) -> PairField {
        PairField { u: &self.u - &rhs.u, ut: &self.ut - &rhs.ut }
    }
}

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{SpectralField, TorusSpec, AREA};
use crate::error::{Error, Result};

/// Real samples on the uniform `M×M` grid `x = (2π j1/M, 2π j2/M)`,
/// row-major in `j1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid {
    m: usize,
    values: Vec<f64>,
}

impl RealGrid {
    pub fn zeros(m: usize) -> Self {
        Self { m, values: vec![0.0; m * m] }
    }

    pub fn from_values(m: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), m * m, "grid size mismatch");
        Self { m, values }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = 2.0 * PI / m as f64;
        let values = (0..m * m).map(|i| f((i / m) as f64 * h, (i % m) as f64 * h)).collect();
        Self { m, values }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { m: self.m, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &RealGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.m, other.m, "grid size mismatch");
        Self { m: self.m, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// Rectangle-rule quadrature `Σ_j v_j (2π/M)²`; exact for trigonometric
    /// polynomials of degree `< M`.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * AREA / (self.m * self.m) as f64
    }

    /// `(∫|v|^p)^{1/p}` by the same quadrature; `p = ∞` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |a, &v| a.max(v.abs()));
        }
        let cell = AREA / (self.m * self.m) as f64;
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * cell).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.lp_norm(f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// FFT plans for one grid size; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct Collocation {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Collocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Collocation").field("m", &self.m).finish()
    }
}

#[inline]
fn wrap(n: i64, m: usize) -> usize {
    n.rem_euclid(m as i64) as usize
}

/// Signed wavenumber of grid index `k`.
#[inline]
fn wavenumber(k: usize, m: usize) -> i64 {
    if k <= m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

impl Collocation {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    pub fn for_spec(spec: &TorusSpec) -> Self {
        Self::new(spec.grid)
    }

    pub fn size(&self) -> usize {
        self.m
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
        for r in 0..m {
            for c in 0..m {
                dst[c * m + r] = src[r * m + c];
            }
        }
    }

    /// Samples the field on the grid after checking Hermitian symmetry.
    pub fn to_grid(&self, field: &SpectralField) -> Result<RealGrid> {
        field.check_hermitian()?;
        self.to_grid_unchecked(field)
    }

    /// Samples the field on the grid. The imaginary part of the synthesis is
    /// discarded, which is exact for Hermitian input.
    pub fn to_grid_unchecked(&self, field: &SpectralField) -> Result<RealGrid> {
        let m = self.m;
        let n = field.n_max() as i64;
        if m < 2 * field.n_max() + 1 {
            return Err(Error::InvalidSpec(format!("grid M = {m} cannot resolve cutoff N = {n}")));
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; m * m];
        for n1 in -n..=n {
            let row = wrap(n1, m);
            for n2 in -n..=n {
                buf[row * m + wrap(n2, m)] = field[(n1, n2)];
            }
            self.inverse.process(&mut buf[row * m..(row + 1) * m]);
        }
        let mut tr = vec![zero; m * m];
        Self::transpose(&buf, &mut tr, m);
        self.inverse.process(&mut tr);
        // tr[j2 * m + j1] now holds u(x_{j1}, x_{j2}).
        let mut values = vec![0.0; m * m];
        for j1 in 0..m {
            for j2 in 0..m {
                values[j1 * m + j2] = tr[j2 * m + j1].re;
            }
        }
        Ok(RealGrid { m, values })
    }

    /// Full discrete spectrum of the grid function, indexed like the grid
    /// with wrapped wavenumbers and normalized so entries are Fourier
    /// coefficients.
    fn grid_spectrum(&self, grid: &RealGrid) -> Vec<Complex64> {
        let m = self.m;
        assert_eq!(grid.m, m, "grid size mismatch");
        let mut buf: Vec<Complex64> = grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let mut tr = vec![Complex64::new(0.0, 0.0); m * m];
        Self::transpose(&buf, &mut tr, m);
        self.forward.process(&mut tr);
        let norm = 1.0 / (m * m) as f64;
        // tr[k2 * m + k1] -> spec[k1 * m + k2]
        let mut spec = vec![Complex64::new(0.0, 0.0); m * m];
        for k1 in 0..m {
            for k2 in 0..m {
                spec[k1 * m + k2] = tr[k2 * m + k1] * norm;
            }
        }
        spec
    }

    fn grid_synthesis(&self, mut spec: Vec<Complex64>) -> RealGrid {
        let m = self.m;
        self.inverse.process(&mut spec);
        let mut tr = vec![Complex64::new(0.0, 0.0); m * m];
        Self::transpose(&spec, &mut tr, m);
        self.inverse.process(&mut tr);
        let mut values = vec![0.0; m * m];
        for j1 in 0..m {
            for j2 in 0..m {
                values[j1 * m + j2] = tr[j2 * m + j1].re;
            }
        }
        RealGrid { m, values }
    }

    /// Discrete Fourier coefficients of the grid function, projected to
    /// `|n|_∞ ≤ n_max`.
    pub fn from_grid(&self, grid: &RealGrid, n_max: usize) -> SpectralField {
        let m = self.m;
        assert!(2 * n_max < m, "cutoff N = {n_max} not resolved by grid M = {m}");
        assert_eq!(grid.m, m, "grid size mismatch");
        let n = n_max as i64;
        let mut buf: Vec<Complex64> = grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let norm = 1.0 / (m * m) as f64;
        let mut out = SpectralField::zeros(n_max);
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for n2 in -n..=n {
            let c = wrap(n2, m);
            for r in 0..m {
                col[r] = buf[r * m + c];
            }
            self.forward.process(&mut col);
            for n1 in -n..=n {
                out[(n1, n2)] = col[wrap(n1, m)] * norm;
            }
        }
        // Hermitian up to rounding; symmetrize so downstream checks are exact.
        for (n1, n2) in super::half_modes(n_max) {
            let z = out[(n1, n2)];
            let w = out[(-n1, -n2)];
            out.set_pair(n1, n2, (z + w.conj()) * 0.5);
        }
        out
    }

    /// Applies the Fourier multiplier `m(k1, k2)` to a grid function at full
    /// grid resolution.
    pub fn grid_multiplier(&self, grid: &RealGrid, mult: impl Fn(i64, i64) -> f64) -> RealGrid {
        let m = self.m;
        let mut spec = self.grid_spectrum(grid);
        for k1 in 0..m {
            let w1 = wavenumber(k1, m);
            for k2 in 0..m {
                spec[k1 * m + k2] *= mult(w1, wavenumber(k2, m));
            }
        }
        self.grid_synthesis(spec)
    }

    /// `e^{δΔ}` on the grid; `δ = ∞` keeps only the mean.
    pub fn grid_heat_smooth(&self, grid: &RealGrid, delta: f64) -> Result<RealGrid> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::NegativeSmoothing(delta));
        }
        if delta == 0.0 {
            return Ok(grid.clone());
        }
        Ok(self.grid_multiplier(grid, |k1, k2| heat_factor(delta, k1, k2)))
    }
}

/// `e^{-δ|k|²}` with the `δ = ∞` limit taken mode by mode.
#[inline]
pub(crate) fn heat_factor(delta: f64, k1: i64, k2: i64) -> f64 {
    let k2sum = (k1 * k1 + k2 * k2) as f64;
    if k2sum == 0.0 {
        1.0
    } else {
        (-delta * k2sum).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn dc_mode_is_constant_grid() {
        let f = SpectralField::constant(3, 2.5);
        let col = Collocation::new(9);
        let g = col.to_grid(&f).unwrap();
        assert!(g.values().iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn single_cosine() {
        let mut f = SpectralField::zeros(2);
        f.set_pair(1, 0, Complex64::new(0.5, 0.0));
        let col = Collocation::new(8);
        let g = col.to_grid(&f).unwrap();
        let expect = RealGrid::from_fn(8, |x1, _| x1.cos());
        for (a, b) in g.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut f = SpectralField::zeros(2);
        f[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(Collocation::new(8).to_grid(&f), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn heat_on_grid_halves_mode_11() {
        let col = Collocation::new(12);
        let g = RealGrid::from_fn(12, |x1, x2| (x1 + x2).cos());
        let s = col.grid_heat_smooth(&g, std::f64::consts::LN_2 / 2.0).unwrap();
        for (a, b) in s.values().iter().zip(g.values()) {
            assert!((a - 0.5 * b).abs() < 1e-14);
        }
        let mean_only = col.grid_heat_smooth(&g.map(|v| v + 3.0), f64::INFINITY).unwrap();
        assert!(mean_only.values().iter().all(|v| (v - 3.0).abs() < 1e-13));
        assert!(col.grid_heat_smooth(&g, -1.0).is_err());
    }
}

use super::{bracket_sq, Collocation, PairField, SpectralField, AREA};
use crate::error::{Error, Result};

/// Sharp Fourier projector onto `|n|_∞ ≤ cutoff`. The array shape is kept.
pub fn project(field: &SpectralField, cutoff: usize) -> Result<SpectralField> {
    if cutoff > field.n_max() {
        return Err(Error::CutoffTooLarge { requested: cutoff, available: field.n_max() });
    }
    let c = cutoff as i64;
    let mut out = field.clone();
    for (i, z) in out.coeffs_mut().iter_mut().enumerate() {
        let (n1, n2) = field.mode_of(i);
        if n1.abs() > c || n2.abs() > c {
            *z = Default::default();
        }
    }
    Ok(out)
}

/// Bessel potential `⟨∇⟩^s`: multiplies `û(n)` by `⟨n⟩^s`.
pub fn bessel(field: &SpectralField, s: f64) -> SpectralField {
    let mut out = field.clone();
    for (i, z) in out.coeffs_mut().iter_mut().enumerate() {
        let (n1, n2) = field.mode_of(i);
        *z *= bracket_sq(n1, n2).powf(0.5 * s);
    }
    out
}

/// `‖f‖_{L²}` by Parseval.
pub fn l2_norm(field: &SpectralField) -> f64 {
    (AREA * field.coeff_norm_sq()).sqrt()
}

/// `‖⟨∇⟩^s f‖_{L²}`.
pub fn h_norm(field: &SpectralField, s: f64) -> f64 {
    let sum: f64 = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let (n1, n2) = field.mode_of(i);
            bracket_sq(n1, n2).powf(s) * z.norm_sqr()
        })
        .sum();
    (AREA * sum).sqrt()
}

/// Phase-space norm on `H^s × H^{s-1}`.
pub fn sobolev(pair: &PairField, s: f64) -> f64 {
    h_norm(&pair.u, s).hypot(h_norm(&pair.ut, s - 1.0))
}

/// `‖⟨∇⟩^s f‖_{L^p}` for `p ∈ {2, 4, ∞}`, with the Lebesgue norm evaluated by
/// collocation quadrature on the given grid.
pub fn wsp(field: &SpectralField, s: f64, p: f64, grid: &Collocation) -> Result<f64> {
    if !(p == 2.0 || p == 4.0 || p == f64::INFINITY) {
        return Err(Error::UnsupportedExponent(p));
    }
    let g = grid.to_grid_unchecked(&bessel(field, s))?;
    Ok(g.lp_norm(p))
}

/// Heat semigroup `e^{δΔ}`: multiplies `û(n)` by `e^{-δ|n|²}`.
pub fn heat_smooth(field: &SpectralField, delta: f64) -> Result<SpectralField> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::NegativeSmoothing(delta));
    }
    let mut out = field.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    for (i, z) in out.coeffs_mut().iter_mut().enumerate() {
        let (n1, n2) = field.mode_of(i);
        *z *= super::grid::heat_factor(delta, n1, n2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::{LN_2, PI};

    fn cosine() -> SpectralField {
        let mut f = SpectralField::zeros(3);
        f.set_pair(1, 0, Complex64::new(0.5, 0.0));
        f
    }

    #[test]
    fn project_edges() {
        let mut f = SpectralField::zeros(4);
        f.set_pair(3, 0, Complex64::new(1.0, 0.0));
        assert_eq!(project(&f, 4).unwrap(), f);
        assert_eq!(project(&f, 2).unwrap(), SpectralField::zeros(4));
        assert!(project(&f, 5).is_err());
    }

    #[test]
    fn dc_sobolev_norm() {
        let c = -1.75;
        let pair = PairField { u: SpectralField::constant(3, c), ut: SpectralField::zeros(3) };
        for s in [-1.0, 0.0, 0.9, 2.0] {
            assert!((sobolev(&pair, s) - 2.0 * PI * c.abs()).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_bessel_scaling() {
        let f = cosine();
        let l2 = l2_norm(&f);
        assert!((l2 - (2.0 * PI * PI).sqrt()).abs() < 1e-13);
        for s in [-0.5, 1.0, 3.0] {
            assert!((h_norm(&f, s) - 2f64.powf(s / 2.0) * l2).abs() < 1e-12);
            assert!((l2_norm(&bessel(&f, s)) - h_norm(&f, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn wsp_rejects_other_exponents() {
        let col = Collocation::new(8);
        assert!(matches!(wsp(&cosine(), 0.0, 3.0, &col), Err(Error::UnsupportedExponent(_))));
        let l2 = wsp(&cosine(), 0.0, 2.0, &col).unwrap();
        assert!((l2 - l2_norm(&cosine())).abs() < 1e-12);
        let linf = wsp(&cosine(), 0.0, f64::INFINITY, &col).unwrap();
        assert!((linf - 1.0).abs() < 1e-14);
    }

    #[test]
    fn heat_smoothing() {
        let mut f = SpectralField::constant(2, 4.0);
        f.set_pair(1, 1, Complex64::new(0.3, -0.2));
        assert_eq!(heat_smooth(&f, 0.0).unwrap(), f);
        let g = heat_smooth(&f, LN_2 / 2.0).unwrap();
        assert_eq!(g[(0, 0)], f[(0, 0)]);
        assert!((g[(1, 1)] - f[(1, 1)] * 0.5).norm() < 1e-15);
        assert!(heat_smooth(&f, -0.1).is_err());
    }
}

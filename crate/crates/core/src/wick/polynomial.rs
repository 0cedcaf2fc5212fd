use std::fmt;

use crate::error::{Error, Result};

/// Real polynomial with ascending coefficients `a_0, a_1, …, a_d`.
/// Trailing zeros are trimmed, so the last stored coefficient is nonzero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn monomial(degree: usize, coeff: f64) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = coeff;
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^j` (zero beyond the degree).
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(j, &c)| j as f64 * c).collect())
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut c = vec![0.0];
        c.extend(self.coeffs.iter().enumerate().map(|(j, &a)| a / (j + 1) as f64));
        Self::new(c)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * a).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    /// Taylor family `q_h = q^{(h)}/h!`, `h = 1..=deg q`, so that
    /// `q(x+y) = q(x) + Σ_h q_h(x) yʰ`.
    pub fn taylor_shift(&self) -> Result<Vec<Polynomial>> {
        if self.is_zero() || self.degree() == 0 {
            return Err(Error::InvalidPolynomial("Taylor shift needs a polynomial of degree >= 1".into()));
        }
        let d = self.degree();
        let family = (1..=d)
            .map(|h| Polynomial::new((h..=d).map(|j| binomial(j, h) * self.coeffs[j]).collect()))
            .collect::<Vec<_>>();
        Ok(family)
    }

    /// Checks the interaction-polynomial constraint: either identically zero
    /// (the Gaussian case) or of degree exactly `two_k` with positive leading
    /// coefficient.
    pub fn validate_interaction(&self, two_k: usize) -> Result<()> {
        if self.is_zero() {
            return Ok(());
        }
        if self.degree() != two_k {
            return Err(Error::InvalidPolynomial(format!("interaction has degree {} but 2k = {two_k}", self.degree())));
        }
        if self.coeffs[two_k] <= 0.0 {
            return Err(Error::InvalidPolynomial("leading coefficient must be positive".into()));
        }
        Ok(())
    }
}

/// Binomial coefficient as a float; exact for the small degrees used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, c)| match j {
                0 => format!("{c}"),
                1 => format!("{c}*x"),
                _ => format!("{c}*x^{j}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

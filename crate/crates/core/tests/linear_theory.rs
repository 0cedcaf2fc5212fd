mod common;

use common::*;
use hphi2::dynamics::{
    convolution_covariance, decay_constant, duhamel_matrix, mode_operator_norm, transfer_matrix, ModeStep,
};
use hphi2::spectral::bracket_sq;

const PROBE_MODES: [(i64, i64); 6] = [(0, 0), (1, 0), (1, 1), (3, 2), (10, 7), (64, 64)];
const PROBE_TIMES: [f64; 6] = [1e-3, 0.01, 0.3, 1.0, 2.5, 10.0];

#[test]
fn transfer_matches_matrix_exponential() {
    for &(a, b) in &PROBE_MODES {
        let l = bracket_sq(a, b);
        for &t in &PROBE_TIMES {
            let got = weighted(&transfer_matrix(l, t), l);
            let want = weighted(&transfer_oracle(l, t), l);
            let d = max_diff(&got, &want);
            assert!(d < 1e-8, "E mode ({a},{b}) t {t}: {d:e}");
        }
    }
}

#[test]
fn duhamel_matches_quadrature() {
    for &(a, b) in &PROBE_MODES[..5] {
        let l = bracket_sq(a, b);
        for &t in &[1e-3, 0.01, 0.3, 1.0, 2.5] {
            let got = weighted(&duhamel_matrix(l, t), l);
            let want = weighted(&duhamel_oracle(l, t), l);
            let d = max_diff(&got, &want);
            assert!(d < 1e-8, "J mode ({a},{b}) t {t}: {d:e}");
        }
    }
}

#[test]
fn covariance_matches_quadrature_in_both_branches() {
    for &(a, b) in &PROBE_MODES[..5] {
        let l = bracket_sq(a, b);
        for &t in &[1e-3, 0.01, 0.3, 1.0, 2.5] {
            let got = weighted_cov(&convolution_covariance(l, t), l);
            let want = weighted_cov(&covariance_oracle(l, t), l);
            let d = max_diff(&got, &want);
            assert!(d < 1e-8, "C mode ({a},{b}) t {t}: {d:e}");
            let q = weighted_cov(&ModeStep::new(l, t).noise_cov, l);
            assert!(max_diff(&q, &want) < 1e-8);
        }
    }
}

#[test]
fn covariance_solves_lyapunov_and_converges() {
    for &(a, b) in &PROBE_MODES {
        let l = bracket_sq(a, b);
        for &t in &[0.1, 1.0, 5.0] {
            // C' = A C + C Aᵀ + 2 e₂e₂ᵀ, checked by a centered difference.
            let h = 1e-5;
            let (cp, cm) = (convolution_covariance(l, t + h), convolution_covariance(l, t - h));
            let c = convolution_covariance(l, t);
            let g = generator(l);
            let ac = mul(&g, &c);
            let rhs = [[ac[0][0] * 2.0, ac[0][1] + ac[1][0]], [ac[0][1] + ac[1][0], 2.0 * ac[1][1] + 2.0]];
            let lhs = [
                [(cp[0][0] - cm[0][0]) / (2.0 * h), (cp[0][1] - cm[0][1]) / (2.0 * h)],
                [(cp[1][0] - cm[1][0]) / (2.0 * h), (cp[1][1] - cm[1][1]) / (2.0 * h)],
            ];
            let d = max_diff(&weighted_cov(&lhs, l), &weighted_cov(&rhs, l));
            assert!(d < 1e-5 * l.sqrt(), "Lyapunov mode ({a},{b}) t {t}: {d:e}");
        }
        let inf = convolution_covariance(l, 60.0);
        assert!(max_diff(&weighted_cov(&inf, l), &[[1.0, 0.0], [0.0, 1.0]]) < 1e-12);
    }
}

#[test]
fn semigroup_property() {
    for &(a, b) in &PROBE_MODES {
        let l = bracket_sq(a, b);
        for &(s, t) in &[(0.1, 0.2), (0.37, 1.3), (2.0, 3.0), (4.9, 5.1)] {
            let prod = mul(&transfer_matrix(l, s), &transfer_matrix(l, t));
            let d = max_diff(&weighted(&transfer_matrix(l, s + t), l), &weighted(&prod, l));
            assert!(d < 1e-12, "semigroup mode ({a},{b}) s {s} t {t}: {d:e}");
        }
        // Covariance composition: C(s + t) = E(t) C(s) E(t)ᵀ + C(t).
        let (s, t) = (0.7, 1.9);
        let e = transfer_matrix(l, t);
        let mut lhs = mul(&mul(&e, &convolution_covariance(l, s)), &transpose(&e));
        let ct = convolution_covariance(l, t);
        for i in 0..2 {
            for j in 0..2 {
                lhs[i][j] += ct[i][j];
            }
        }
        let d = max_diff(&weighted_cov(&lhs, l), &weighted_cov(&convolution_covariance(l, s + t), l));
        assert!(d < 1e-12, "covariance composition mode ({a},{b}): {d:e}");
    }
}

#[test]
fn decay_constant_is_bounded() {
    let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let c = decay_constant(64, &times);
    assert!(c <= 10.0, "decay constant {c}");
    assert!((c - 3f64.sqrt()).abs() < 1e-3, "decay constant {c}");
    // Cross-check the closed-form norm against the oracle's singular values.
    for &(a, b) in &PROBE_MODES {
        let l = bracket_sq(a, b);
        let m = weighted(&transfer_oracle(l, 1.3), l);
        let mtm = mul(&transpose(&m), &m);
        let tr = mtm[0][0] + mtm[1][1];
        let det = mtm[0][0] * mtm[1][1] - mtm[0][1] * mtm[1][0];
        let top = (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt();
        assert!((top - mode_operator_norm(l, 1.3)).abs() < 1e-9);
    }
}

//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

pub type M2 = [[f64; 2]; 2];

pub fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Generator of the per-mode linear flow `(u, u_t)' = A (u, u_t)`.
pub fn generator(lambda: f64) -> M2 {
    [[0.0, 1.0], [-lambda, -1.0]]
}

/// `exp(a)` by scaling and squaring with a 30-term Taylor series.
pub fn expm(a: &M2) -> M2 {
    let norm = a.iter().flatten().map(|x| x.abs()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let b = [[a[0][0] * scale, a[0][1] * scale], [a[1][0] * scale, a[1][1] * scale]];
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    let mut sum = term;
    for k in 1..=30 {
        term = mul(&term, &b);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

pub fn transfer_oracle(lambda: f64, t: f64) -> M2 {
    let g = generator(lambda);
    expm(&[[g[0][0] * t, g[0][1] * t], [g[1][0] * t, g[1][1] * t]])
}

/// Romberg integration of `g(E(s))` over `s ∈ [0, t]`, all components at
/// once. Node values of `E` come from stepping with `E(h)` on each level so
/// that only two exponentials are evaluated per level.
pub fn romberg_flow<const K: usize>(lambda: f64, t: f64, g: impl Fn(&M2) -> [f64; K], tol: f64) -> [f64; K] {
    if t == 0.0 {
        return [0.0; K];
    }
    let combine = |a: [f64; K], wa: f64, b: [f64; K], wb: f64| {
        let mut out = [0.0; K];
        for i in 0..K {
            out[i] = wa * a[i] + wb * b[i];
        }
        out
    };
    let ends = combine(g(&[[1.0, 0.0], [0.0, 1.0]]), 0.5 * t, g(&transfer_oracle(lambda, t)), 0.5 * t);
    let mut rows: Vec<Vec<[f64; K]>> = vec![vec![ends]];
    for level in 1..=22 {
        let n = 1usize << (level - 1);
        let h = t / (2 * n) as f64;
        let stride = transfer_oracle(lambda, 2.0 * h);
        let mut e = transfer_oracle(lambda, h);
        let mut mid = [0.0; K];
        for _ in 0..n {
            let v = g(&e);
            for k in 0..K {
                mid[k] += v[k];
            }
            e = mul(&stride, &e);
        }
        let mut row = vec![combine(rows[level - 1][0], 0.5, mid, h)];
        for k in 1..=level {
            let w = 4f64.powi(k as i32);
            row.push(combine(row[k - 1], w / (w - 1.0), rows[level - 1][k - 1], -1.0 / (w - 1.0)));
        }
        let (prev, cur) = (rows[level - 1][level - 1], row[level]);
        rows.push(row);
        let converged = (0..K).all(|k| (cur[k] - prev[k]).abs() <= tol * cur[k].abs().max(1e-300));
        if level > 4 && converged {
            return cur;
        }
    }
    *rows.last().unwrap().last().unwrap()
}

/// `J(t) = ∫₀ᵗ E(s) ds` by Romberg over the exponential oracle.
pub fn duhamel_oracle(lambda: f64, t: f64) -> M2 {
    let v = romberg_flow(lambda, t, |e| [e[0][0], e[0][1], e[1][0], e[1][1]], 1e-13);
    [[v[0], v[1]], [v[2], v[3]]]
}

/// `C(t) = 2 ∫₀ᵗ E(s) e₂ e₂ᵀ E(s)ᵀ ds` by Romberg over the exponential oracle.
pub fn covariance_oracle(lambda: f64, t: f64) -> M2 {
    let v =
        romberg_flow(lambda, t, |e| [2.0 * e[0][1] * e[0][1], 2.0 * e[0][1] * e[1][1], 2.0 * e[1][1] * e[1][1]], 1e-13);
    [[v[0], v[1]], [v[1], v[2]]]
}

/// Conjugation by `diag(√λ, 1)` so that all entries are of order one in the
/// phase-space norm.
pub fn weighted(m: &M2, lambda: f64) -> M2 {
    let r = lambda.sqrt();
    [[m[0][0], r * m[0][1]], [m[1][0] / r, m[1][1]]]
}

/// `diag(√λ, 1) C diag(√λ, 1)`, the covariance in the phase-space norm.
pub fn weighted_cov(c: &M2, lambda: f64) -> M2 {
    let r = lambda.sqrt();
    [[lambda * c[0][0], r * c[0][1]], [r * c[1][0], c[1][1]]]
}

pub fn max_diff(a: &M2, b: &M2) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `H_n(x, σ²) = Σ_m n! / (m! (n-2m)!) (-σ²/2)^m x^{n-2m}`.
pub fn hermite_explicit(n: usize, x: f64, sigma2: f64) -> f64 {
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    (0..=n / 2)
        .map(|m| fact(n) / (fact(m) * fact(n - 2 * m)) * (-0.5 * sigma2).powi(m as i32) * x.powi((n - 2 * m) as i32))
        .sum()
}

/// Classical RK4 for `y' = f(y)` on `[0, t]` with `steps` steps.
pub fn rk4<const D: usize>(f: impl Fn(&[f64; D]) -> [f64; D], y0: [f64; D], t: f64, steps: usize) -> [f64; D] {
    let h = t / steps as f64;
    let axpy = |y: &[f64; D], a: f64, k: &[f64; D]| {
        let mut out = *y;
        for i in 0..D {
            out[i] += a * k[i];
        }
        out
    };
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, 0.5 * h, &k1));
        let k3 = f(&axpy(&y, 0.5 * h, &k2));
        let k4 = f(&axpy(&y, h, &k3));
        for i in 0..D {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

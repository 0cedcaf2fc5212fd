use rayon::prelude::*;

use super::stats::{summarize, Summary};
use super::{stream_rng, streams};
use crate::dynamics::{convolution_covariance, ModePropagator};
use crate::error::{Error, Result};
use crate::spectral::{bracket_sq, PairField, AREA};

/// Monte Carlo check of the stochastic-convolution law.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceConfig {
    pub n_max: usize,
    pub modes: Vec<(i64, i64)>,
    /// Observation times; each must be a multiple of `dt`.
    pub times: Vec<f64>,
    pub paths: usize,
    /// Step of the exact linear sampler.
    pub dt: f64,
    /// Times at or beyond this are also compared with `C(∞)`.
    pub limit_time: f64,
    pub seed: u64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            n_max: 2,
            modes: vec![(0, 0), (1, 0), (2, 1)],
            times: vec![0.5, 2.0, 20.0],
            paths: 100_000,
            dt: 0.5,
            limit_time: 20.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceRow {
    pub mode: (i64, i64),
    pub t: f64,
    /// `uu`, `uv` or `vv`; a `_inf` suffix marks comparison with `C(∞)`.
    pub entry: String,
    pub closed_form: f64,
    pub mc: Summary,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceReport {
    pub rows: Vec<CovarianceRow>,
    pub pass: bool,
}

const ENTRIES: [(&str, usize, usize); 3] = [("uu", 0, 0), ("uv", 0, 1), ("vv", 1, 1)];

/// Runs `paths` exact linear trajectories from zero and compares the
/// empirical covariance `4π² Re E[x_a conj(x_b)]` of each probe mode with
/// the closed form `C(t)`, at three standard errors.
pub fn covariance_experiment(cfg: &CovarianceConfig) -> Result<CovarianceReport> {
    let prop = ModePropagator::new(cfg.n_max, cfg.dt)?;
    let n = cfg.n_max as i64;
    if cfg.modes.iter().any(|&(a, b)| a.abs() > n || b.abs() > n) {
        return Err(Error::InvalidParameter("probe mode outside the cutoff".into()));
    }
    let mut marks = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let k = (t / cfg.dt).round();
        if t < 0.0 || (k * cfg.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidParameter(format!("time {t} is not a multiple of dt")));
        }
        marks.push(k as usize);
    }
    let steps = marks.iter().copied().max().unwrap_or(0);
    let width = cfg.times.len() * cfg.modes.len() * ENTRIES.len();

    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, streams::path(i));
            let mut x = PairField::zeros(cfg.n_max);
            let mut out = vec![0.0; width];
            let fill = |x: &PairField, ti: usize, out: &mut Vec<f64>| {
                for (mi, &(a, b)) in cfg.modes.iter().enumerate() {
                    let z = [x.u[(a, b)], x.ut[(a, b)]];
                    for (ei, &(_, r, c)) in ENTRIES.iter().enumerate() {
                        let idx = (ti * cfg.modes.len() + mi) * ENTRIES.len() + ei;
                        out[idx] = AREA * (z[r] * z[c].conj()).re;
                    }
                }
            };
            for (ti, &m) in marks.iter().enumerate() {
                if m == 0 {
                    fill(&x, ti, &mut out);
                }
            }
            for s in 1..=steps {
                x = prop.ou_step(&x, &mut rng)?;
                for (ti, &m) in marks.iter().enumerate() {
                    if m == s {
                        fill(&x, ti, &mut out);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (ti, &t) in cfg.times.iter().enumerate() {
        for (mi, &(a, b)) in cfg.modes.iter().enumerate() {
            let lambda = bracket_sq(a, b);
            let exact = convolution_covariance(lambda, t);
            let limit = [[1.0 / lambda, 0.0], [0.0, 1.0]];
            for (ei, &(name, r, c)) in ENTRIES.iter().enumerate() {
                let idx = (ti * cfg.modes.len() + mi) * ENTRIES.len() + ei;
                let col: Vec<f64> = per_path.iter().map(|v| v[idx]).collect();
                let mc = summarize(&col);
                let mut push = |entry: String, target: f64| {
                    let d = (mc.mean - target).abs();
                    let pass = d == 0.0 || d <= 3.0 * mc.stderr;
                    rows.push(CovarianceRow { mode: (a, b), t, entry, closed_form: target, mc, pass });
                };
                push(name.to_string(), exact[r][c]);
                if t >= cfg.limit_time {
                    push(format!("{name}_inf"), limit[r][c]);
                }
            }
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(CovarianceReport { rows, pass })
}

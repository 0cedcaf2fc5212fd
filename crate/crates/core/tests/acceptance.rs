//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 2 8`.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use hphi2::cli::config::{Overrides, RunConfig};
use hphi2::cli::{execute, Command};
use hphi2::dynamics::{
    convolution_covariance, decay_constant, duhamel_matrix, sqe_step, transfer_matrix, ModeStep, SqePropagator,
};
use hphi2::experiments::stats::{batch_means, Summary};
use hphi2::experiments::{
    contraction_experiment, covariance_experiment, ediff_property, epsilon0_sweep, gibbs_ensemble, girsanov_experiment,
    invariance_experiment, stream_rng, CouplingConfig, CovarianceConfig, InvarianceConfig,
};
use hphi2::gibbs::{importance_estimate, sample_rho0, ChainSchedule};
use hphi2::spectral::{bracket_sq, PairField, SpectralField, TorusSpec};
use hphi2::wick::{binomial, hermite, hermite_table, Polynomial, WickContext};
use rand::Rng;

/// Relative tolerance of the algebraic identities.
const ALGEBRA_TOL: f64 = 1e-10;
/// Agreement of closed forms with the exponential and quadrature oracles.
const ORACLE_TOL: f64 = 1e-8;
const SEMIGROUP_TOL: f64 = 1e-12;
const DECAY_CONSTANT_MAX: f64 = 10.0;
/// Width of every Monte Carlo agreement band, in combined standard errors.
const SIGMAS: f64 = 3.0;
/// Reconstruction residual bound in units of `dt`.
const RESIDUAL_STEPS: f64 = 10.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn agree(a: &Summary, b: &Summary) -> bool {
    (a.mean - b.mean).abs() <= SIGMAS * a.stderr.hypot(b.stderr)
}

/// Hermite recurrence, derivative and binomial identities on the values of
/// reference-measure samples, for `N = 4..16` and degrees up to 8.
fn algebraic_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for n_max in [4usize, 8, 12, 16] {
        let spec = TorusSpec::dealiased(n_max, 0.1, 8).unwrap();
        let ctx = WickContext::new(spec).unwrap();
        let s2 = ctx.sigma2();
        let mut rng = stream_rng(101, n_max as u64);
        let u = sample_rho0(&spec, &mut rng).u;
        let v = sample_rho0(&spec, &mut rng).u;
        let (ug, vg) = (ctx.to_grid(&u).unwrap(), ctx.to_grid(&v).unwrap());

        let table = hermite_table(8, s2);
        for (&x, &y) in ug.values().iter().zip(vg.values()) {
            for n in 0..=8 {
                let explicit = hermite_explicit(n, x, s2);
                worst = worst.max((hermite(n, x, s2) - explicit).abs() / explicit.abs().max(1.0));
                worst = worst.max((table[n].eval(x) - explicit).abs() / explicit.abs().max(1.0));
                if n >= 1 {
                    let d = table[n].derivative().eval(x);
                    let want = n as f64 * table[n - 1].eval(x);
                    worst = worst.max((d - want).abs() / want.abs().max(1.0));
                }
                let terms: Vec<f64> =
                    (0..=n).map(|j| binomial(n, j) * hermite(j, x, s2) * y.powi((n - j) as i32)).collect();
                let scale = terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0);
                worst = worst.max((hermite(n, x + y, s2) - terms.iter().sum::<f64>()).abs() / scale);
            }
        }

        // Spectral form: π_N :q(u+v): against the Taylor expansion in v.
        let q = Polynomial::new(vec![0.2, -1.0, 0.5, 0.3, -0.7, 0.1, 0.05, 0.25]);
        let direct = ctx.wick_poly(&q, &(&u + &v)).unwrap();
        let expanded = ctx.wick_shift_expand(&q, &u, &v).unwrap();
        let scale = direct.coeffs().iter().map(|z| z.norm()).fold(1.0, f64::max);
        worst = worst.max(direct.max_abs_diff(&expanded) / scale);
    }
    Verdict { pass: worst < ALGEBRA_TOL, detail: format!("worst relative defect {worst:.2e}") }
}

/// Per-mode transfer, Duhamel and covariance matrices against independent
/// oracles, semigroup identities and the decay constant over `|n|_∞ ≤ 64`.
fn linear_theory_oracle() -> Verdict {
    let modes = [(0, 0), (1, 0), (1, 1), (2, 1), (5, 3), (16, 16), (40, 9), (64, 0), (64, 64)];
    let times = [0.0, 1e-3, 0.01, 0.1, 0.5, 1.0, 2.5, 5.0, 10.0];
    let (mut oracle, mut semigroup): (f64, f64) = (0.0, 0.0);
    for &(a, b) in &modes {
        let l = bracket_sq(a, b);
        for &t in &times {
            oracle = oracle.max(max_diff(&weighted(&transfer_matrix(l, t), l), &weighted(&transfer_oracle(l, t), l)));
            oracle = oracle.max(max_diff(&weighted(&duhamel_matrix(l, t), l), &weighted(&duhamel_oracle(l, t), l)));
            oracle = oracle.max(max_diff(
                &weighted_cov(&convolution_covariance(l, t), l),
                &weighted_cov(&covariance_oracle(l, t), l),
            ));
        }
        for &dt in &[1e-3, 1e-2, 5e-2] {
            let step = ModeStep::new(l, dt);
            oracle =
                oracle.max(max_diff(&weighted_cov(&step.noise_cov, l), &weighted_cov(&covariance_oracle(l, dt), l)));
            oracle = oracle.max(max_diff(&weighted(&step.transfer, l), &weighted(&transfer_oracle(l, dt), l)));
        }
        for &(s, t) in &[(0.1, 0.2), (0.37, 1.3), (2.0, 3.0), (4.9, 5.1)] {
            let prod = mul(&transfer_matrix(l, s), &transfer_matrix(l, t));
            semigroup = semigroup.max(max_diff(&weighted(&transfer_matrix(l, s + t), l), &weighted(&prod, l)));
        }
    }
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let c = decay_constant(64, &grid);
    Verdict {
        pass: oracle < ORACLE_TOL && semigroup < SEMIGROUP_TOL && c <= DECAY_CONSTANT_MAX,
        detail: format!("oracle defect {oracle:.2e}, semigroup defect {semigroup:.2e}, decay constant {c:.7}"),
    }
}

fn convolution_law() -> Verdict {
    let rep = covariance_experiment(&CovarianceConfig::default()).unwrap();
    let failing: Vec<String> =
        rep.rows.iter().filter(|r| !r.pass).map(|r| format!("{:?} t={} {}", r.mode, r.t, r.entry)).collect();
    Verdict { pass: rep.pass, detail: format!("{} rows, outside 3 sigma: [{}]", rep.rows.len(), failing.join("; ")) }
}

fn gibbs_invariance() -> Verdict {
    let base = InvarianceConfig {
        ensemble: 400,
        chain: ChainSchedule { burn_in: 10_000, thin: 100, target_accept: 0.3, tune: true },
        ..Default::default()
    };
    let good = invariance_experiment(&base).unwrap();
    let control = invariance_experiment(&InvarianceConfig { sigma2_factor: 2.0, ..base }).unwrap();
    let rows = |r: &hphi2::experiments::InvarianceReport| {
        r.rows
            .iter()
            .map(|c| {
                format!(
                    "{} {:.4}->{:.4} (|d| {:.3} vs {:.3})",
                    c.name,
                    c.initial.mean,
                    c.terminal.mean,
                    (c.initial.mean - c.terminal.mean).abs(),
                    c.threshold
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    Verdict {
        pass: good.pass && !control.pass,
        detail: format!(
            "correct model {} [{}]; doubled sigma^2 control {} [{}]",
            if good.pass { "passes" } else { "fails" },
            rows(&good),
            if control.pass { "passes" } else { "fails" },
            rows(&control)
        ),
    }
}

/// pCN chain, long parabolic run and importance reweighting on `∫:u²:`.
fn sampler_cross_validation() -> Verdict {
    let spec = TorusSpec::dealiased(8, 0.1, 4).unwrap();
    let p_big = Polynomial::monomial(4, 0.25);
    let ctx = WickContext::new(spec).unwrap();
    let mass = |x: &PairField| ctx.wick_mass(&x.u);

    let schedule = ChainSchedule { burn_in: 10_000, thin: 20, target_accept: 0.3, tune: true };
    let (states, _, _) = gibbs_ensemble(&spec, &p_big, &schedule, 0.5, 5000, 7).unwrap();
    let chain = batch_means(&states.iter().map(mass).collect::<Vec<_>>(), 25);

    let dt = 2e-3;
    let prop = SqePropagator::new(8, dt).unwrap();
    let nonlinearity = p_big.derivative();
    let mut rng = stream_rng(7, 3);
    let mut u: SpectralField = states[0].u.clone();
    let (burn, record_every, records) = (10_000usize, 25usize, 40_000usize);
    for _ in 0..burn {
        u = sqe_step(&u, &prop, &ctx, &nonlinearity, &mut rng).unwrap();
    }
    let mut trace = Vec::with_capacity(records);
    for _ in 0..records {
        for _ in 0..record_every {
            u = sqe_step(&u, &prop, &ctx, &nonlinearity, &mut rng).unwrap();
        }
        trace.push(ctx.wick_mass(&u));
    }
    let sqe = batch_means(&trace, 25);

    let mut rng = stream_rng(7, 2);
    let is = importance_estimate(&ctx, &p_big, &[&mass], 100_000, &mut rng).unwrap();
    let weighted = Summary { mean: is.means[0], stderr: is.stderrs[0], count: 100_000 };

    let pass = agree(&chain, &sqe) && agree(&chain, &weighted) && agree(&sqe, &weighted);
    Verdict {
        pass,
        detail: format!(
            "pCN {:.4} ± {:.4}, parabolic {:.4} ± {:.4}, importance {:.4} ± {:.4} (ESS {:.0})",
            chain.mean, chain.stderr, sqe.mean, sqe.stderr, weighted.mean, weighted.stderr, is.effective_sample_size
        ),
    }
}

fn coupling_contraction() -> Verdict {
    let cfg = CouplingConfig {
        chain: ChainSchedule { burn_in: 10_000, thin: 100, target_accept: 0.3, tune: true },
        ..Default::default()
    };
    let rep = contraction_experiment(&cfg).unwrap();
    let residual_ok = rep.residual < RESIDUAL_STEPS * cfg.dt;
    let a_max = rep.final_a.iter().copied().fold(0.0, f64::max);
    Verdict {
        pass: rep.accepted > 0 && rep.envelope_ok && rep.strict_fraction == 1.0 && residual_ok,
        detail: format!(
            "accepted {}/{}, max A {a_max}, adapted-norm envelope {}, plain-norm envelope with constant 1 on {:.0}% of paths, \
             with constant {:.7} {}, residual {:.2e} (bound {:.2e}), K {:.4} ± {:.4}",
            rep.accepted,
            rep.paths,
            if rep.envelope_ok { "holds" } else { "violated" },
            100.0 * rep.strict_fraction,
            rep.norm_constant,
            if rep.sobolev_envelope_ok { "holds" } else { "violated" },
            rep.residual,
            RESIDUAL_STEPS * cfg.dt,
            rep.cm_constant.mean,
            rep.cm_constant.stderr
        ),
    }
}

fn girsanov_identities() -> Verdict {
    let base = CouplingConfig {
        spec: TorusSpec::dealiased(8, 0.1, 4).unwrap(),
        t_final: 3.0,
        paths: 1000,
        v0_norm: 0.5,
        chain: ChainSchedule { burn_in: 10_000, thin: 100, target_accept: 0.3, tune: true },
        ..Default::default()
    };
    let g = girsanov_experiment(&base).unwrap();
    let r = &g.report;
    let sweep = epsilon0_sweep(&base, &[0.2, 0.1, 0.05]).unwrap();
    let eps: Vec<f64> = sweep.iter().map(|(_, e)| e.estimate).collect();
    let decreasing = g.epsilon0.estimate > eps[0] && eps.windows(2).all(|w| w[1] < w[0]);
    let vanishing = eps[2] < 0.5 * eps[0];
    let pass = r.brackets_one && r.agree && g.epsilon0.estimate < 1.0 && decreasing && vanishing;
    Verdict {
        pass,
        detail: format!(
            "E[weight] {:.4} ± {:.4}; reweighted {:.4} ± {:.4} vs direct {:.4} ± {:.4}; epsilon0 at 0.5: {:.4}; \
             at 0.2, 0.1, 0.05: {:.4}, {:.4}, {:.4}",
            r.weight_mean,
            r.weight_se,
            r.reweighted_mean,
            r.reweighted_se,
            r.direct_mean,
            r.direct_se,
            g.epsilon0.estimate,
            eps[0],
            eps[1],
            eps[2]
        ),
    }
}

fn probability_inequality() -> Verdict {
    let n = 10_000;
    let mut rng = stream_rng(8, 0);
    let mut checks = 0usize;
    let mut held = 0usize;
    let mut check = |f1: &[f64], f2: &[f64], eta: f64| {
        checks += 1;
        if ediff_property(f1, f2, eta).unwrap().holds {
            held += 1;
        }
    };
    let u1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let u2: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
    for eta in [0.0, 0.25, 0.5, 1.0, 1.5, 2.5] {
        check(&u1, &u2, eta);
        check(&u1, &u1, eta);
    }
    for suite in 0..50 {
        let shape = suite % 5;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let x: f64 = rng.random();
            match shape {
                0 => -x.max(1e-300).ln(),
                1 => {
                    if x < 0.4 {
                        0.0
                    } else {
                        3.0 * x
                    }
                }
                2 => x * x * 10.0,
                3 => (x * 20.0).floor(),
                _ => 1.0 / (x + 1e-3),
            }
        };
        let f1: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let f2: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let eta = rng.random::<f64>() * 5.0;
        check(&f1, &f2, eta);
        check(&f1, &f2, 0.0);
        check(&f1, &f1, eta);
    }
    let rejects = ediff_property(&[0.5, -1e-9], &[0.0, 0.0], 0.5).is_err();
    Verdict {
        pass: held == checks && rejects,
        detail: format!("{held}/{checks} checks hold, negative samples rejected: {rejects}"),
    }
}

fn run_twice(cmd: Command, sets: &[&str], root: &Path) -> Result<bool, String> {
    let out = root.join(cmd.name());
    let cfg = RunConfig::resolve(&Overrides {
        set: sets.iter().map(|s| s.to_string()).collect(),
        out: Some(out.clone()),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let first = execute(cmd, &cfg).map_err(|e| e.to_string())?;
    let moved = root.join(format!("{}-first", cmd.name()));
    fs::rename(&out, &moved).map_err(|e| e.to_string())?;
    let second = execute(cmd, &cfg).map_err(|e| e.to_string())?;
    if first != second {
        return Ok(false);
    }
    let mut names: Vec<_> = fs::read_dir(&moved).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut later: Vec<_> = fs::read_dir(&out).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    later.sort();
    if names != later {
        return Ok(false);
    }
    for name in names {
        if fs::read(moved.join(&name)).unwrap() != fs::read(out.join(&name)).unwrap() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let chain = ["gibbs.burn_in=200", "gibbs.thin=5"];
    let small = ["torus.n_max=4", "run.ensemble=8", "run.t_final=0.5"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { [&chain[..], &small[..], extra].concat() };
    let cases: Vec<(Command, Vec<&str>)> = vec![
        (Command::SampleGibbs, with(&[])),
        (Command::Simulate, with(&[])),
        (Command::Simulate, with(&["run.initial=\"gibbs\""])),
        (Command::Couple, with(&["coupling.mode=\"contraction\"", "coupling.residual_time=0.2"])),
        (Command::Couple, with(&["coupling.mode=\"girsanov\"", "coupling.v0_norm=0.3"])),
        (Command::Couple, with(&["coupling.mode=\"sweep\"", "coupling.sweep_norms=[0.2, 0.1]"])),
        (Command::Invariance, with(&["invariance.batches=4"])),
        (Command::Covcheck, with(&["covariance.paths=2000"])),
        (Command::HmcGate, with(&["hmc.paths=3"])),
        (Command::Ediff, with(&[])),
    ];
    let mut failures = Vec::new();
    for (i, (cmd, sets)) in cases.iter().enumerate() {
        let root = tmp.path().join(i.to_string());
        fs::create_dir_all(&root).unwrap();
        match run_twice(*cmd, sets, &root) {
            Ok(true) => {}
            Ok(false) => failures.push(format!("{} differs", cmd.name())),
            Err(e) => failures.push(format!("{} errored: {e}", cmd.name())),
        }
    }
    Verdict {
        pass: failures.is_empty(),
        detail: format!("{} reruns compared byte for byte, failures: [{}]", cases.len(), failures.join("; ")),
    }
}

/// Number, name, check and runtime budget.
type Criterion = (u32, &'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "algebraic exactness", algebraic_exactness, minutes(1)),
        (2, "linear-theory oracle", linear_theory_oracle, minutes(1)),
        (3, "stochastic-convolution law", convolution_law, minutes(5)),
        (4, "Gibbs invariance", gibbs_invariance, minutes(30)),
        (5, "sampler cross-validation", sampler_cross_validation, minutes(15)),
        (6, "coupling contraction", coupling_contraction, minutes(30)),
        (7, "Girsanov identities", girsanov_identities, minutes(30)),
        (8, "probability inequality", probability_inequality, minutes(1)),
        (9, "determinism", determinism, minutes(10)),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (id, name, run, budget) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = v.pass && in_budget;
        all &= pass;
        println!(
            "criterion {id} ({name}): {} | {} | {:.1} s of {} s budget",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

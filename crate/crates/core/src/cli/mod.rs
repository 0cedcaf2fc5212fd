//! Command-line front end: argument parsing, subcommand dispatch, CSV and
//! snapshot output. Every float written to CSV uses 17 significant digits.

pub mod config;
pub mod snapshot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;

use crate::coupling::envelope_violation;
use crate::dynamics::{simulate, Integrator};
use crate::error::{Error, Result};
use crate::experiments::{
    contraction_experiment, covariance_experiment, ediff_property, epsilon0_sweep, gibbs_ensemble, girsanov_experiment,
    hmc_gate, invariance_experiment, stream_rng, streams,
};
use crate::gibbs::{gibbs_potential, sample_rho0};
use crate::spectral::{sobolev, PairField};
use crate::wick::WickContext;
use config::{CouplingMode, Overrides, RunConfig};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "hphi2", version, about = "Damped stochastic wave lab on the 2-torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for ensemble runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw thinned samples from the Gibbs measure with pCN.
    SampleGibbs,
    /// Integrate one trajectory and record observables.
    Simulate,
    /// Run the coupling experiment selected by `coupling.mode`.
    Couple,
    /// Gibbs-invariance test of the dynamics.
    Invariance,
    /// Monte Carlo check of the stochastic-convolution covariance.
    Covcheck,
    /// Accept/reject gate on the time-averaged nonlinearity norm.
    HmcGate,
    /// Empirical check of the coupling probability inequality.
    Ediff,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SampleGibbs => "sample-gibbs",
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::Invariance => "invariance",
            Command::Covcheck => "covcheck",
            Command::HmcGate => "hmc-gate",
            Command::Ediff => "ediff",
        }
    }
}

/// Verdict and one-line summary of a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

/// Exit code for an error: configuration problems are usage errors, file
/// problems are I/O errors and anything raised by an experiment is a failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Snapshot(_) => EXIT_IO,
        Error::Config(_)
        | Error::InvalidSpec(_)
        | Error::InvalidParameter(_)
        | Error::InvalidPolynomial(_)
        | Error::DegreeTooHigh { .. } => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(header).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Resolves the configuration from the command line and the process
/// environment.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => Some(fs::read_to_string(p)?),
        None => None,
    };
    RunConfig::resolve(&Overrides {
        file,
        env: std::env::vars().collect(),
        set: cli.set.clone(),
        seed: cli.seed,
        out: cli.out.clone(),
    })
}

/// Runs `command` with a resolved configuration. Writes the resolved config,
/// the CSV outputs and `summary.txt` into `run.out`.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let out = &cfg.run.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let outcome = match command {
        Command::SampleGibbs => sample_gibbs(cfg, out)?,
        Command::Simulate => simulate_cmd(cfg, out)?,
        Command::Couple => couple(cfg, out)?,
        Command::Invariance => invariance(cfg, out)?,
        Command::Covcheck => covcheck(cfg, out)?,
        Command::HmcGate => gate(cfg, out)?,
        Command::Ediff => ediff(cfg, out)?,
    };
    let line = format!("{}: {} {}", command.name(), verdict(outcome.pass).to_uppercase(), outcome.summary);
    fs::write(out.join("summary.txt"), format!("{line}\n"))?;
    Ok(Outcome { pass: outcome.pass, summary: line })
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with(cli: Cli) -> u8 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    let result = resolve(&cli).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Initial datum named by `run.initial`.
fn initial_state(cfg: &RunConfig) -> Result<PairField> {
    let spec = cfg.spec()?;
    match cfg.run.initial.as_str() {
        "zero" => Ok(PairField::zeros(spec.n_max)),
        "rho0" => Ok(sample_rho0(&spec, &mut stream_rng(cfg.run.seed, streams::AUX))),
        "gibbs" => {
            let (mut s, _, _) =
                gibbs_ensemble(&spec, &cfg.interaction(), &cfg.gibbs.schedule(), cfg.gibbs.beta, 1, cfg.run.seed)?;
            Ok(s.pop().expect("one sample requested"))
        }
        path => {
            let (snap_spec, x) = snapshot::read(Path::new(path))?;
            if snap_spec.n_max != spec.n_max {
                return Err(Error::Config(format!(
                    "snapshot cutoff {} differs from torus.n_max {}",
                    snap_spec.n_max, spec.n_max
                )));
            }
            Ok(x)
        }
    }
}

fn sample_gibbs(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let interaction = cfg.interaction();
    let (samples, beta, acceptance) =
        gibbs_ensemble(&spec, &interaction, &cfg.gibbs.schedule(), cfg.gibbs.beta, cfg.run.ensemble, cfg.run.seed)?;
    let ctx = WickContext::new(spec)?;
    let integ = Integrator::from_interaction(ctx.clone(), &interaction, cfg.run.dt)?;
    let mut rows = Vec::with_capacity(samples.len());
    for (i, x) in samples.iter().enumerate() {
        let o = integ.observe(x, 0.0)?;
        rows.push(vec![
            i.to_string(),
            fmt(o.wick_mass),
            fmt(o.energy),
            fmt(sobolev(x, -spec.epsilon)),
            fmt(gibbs_potential(&x.u, &ctx, &interaction)?),
        ]);
    }
    write_csv(&out.join("gibbs.csv"), &["index", "wick_mass", "energy", "norm_neg", "potential"], &rows)?;
    if let Some(last) = samples.last() {
        snapshot::write(&out.join("last.hpq"), &spec, last)?;
    }
    Ok(Outcome {
        pass: true,
        summary: format!("{} samples, beta {beta:.4}, acceptance {acceptance:.4}", samples.len()),
    })
}

fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let x0 = initial_state(cfg)?;
    let integ = Integrator::from_interaction(WickContext::new(spec)?, &cfg.interaction(), cfg.run.dt)?;
    let mut rng = stream_rng(cfg.run.seed, streams::path(0));
    let traj = simulate(&integ, &x0, cfg.run.t_final, cfg.run.stride, false, &mut rng)?;
    let rows: Vec<Vec<String>> = traj
        .observables
        .iter()
        .map(|o| {
            [o.t, o.energy, o.wick_mass, o.nonlinearity_norm, o.norm_neg, o.norm_pos].into_iter().map(fmt).collect()
        })
        .collect();
    write_csv(
        &out.join("trajectory.csv"),
        &["t", "energy", "wick_mass", "nonlinearity_norm", "norm_neg", "norm_pos"],
        &rows,
    )?;
    let last = traj.terminal.as_ref().expect("terminal state recorded");
    snapshot::write(&out.join("final.hpq"), &spec, last)?;
    Ok(Outcome { pass: true, summary: format!("{} records to t = {}", rows.len(), cfg.run.t_final) })
}

fn couple(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let cc = cfg.coupling()?;
    match cfg.coupling.mode {
        CouplingMode::Contraction => {
            let rep = contraction_experiment(&cc)?;
            let rows: Vec<Vec<String>> = rep
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![
                        i.to_string(),
                        fmt(r.a),
                        fmt(r.cm_energy),
                        fmt(r.ito_integral),
                        fmt(r.exp_mart),
                        r.tau_hit.map(fmt).unwrap_or_default(),
                        verdict(envelope_violation(r).is_none()).to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("contraction.csv"),
                &["record", "a", "cm_energy", "ito_integral", "exp_mart", "tau_hit", "envelope"],
                &rows,
            )?;
            let residual_ok = rep.residual < 10.0 * cc.dt;
            let pass = rep.accepted > 0 && rep.envelope_ok && residual_ok;
            Ok(Outcome {
                pass,
                summary: format!(
                    "accepted {}/{}, envelope {}, norm constant {:.6}, strict fraction {:.3}, residual {:.3e}",
                    rep.accepted,
                    rep.paths,
                    verdict(rep.envelope_ok),
                    rep.norm_constant,
                    rep.strict_fraction,
                    rep.residual
                ),
            })
        }
        CouplingMode::Girsanov => {
            let g = girsanov_experiment(&cc)?;
            let r = &g.report;
            let e = &g.epsilon0;
            let pairs = [
                ("weight_mean", r.weight_mean),
                ("weight_stderr", r.weight_se),
                ("reweighted_mean", r.reweighted_mean),
                ("reweighted_stderr", r.reweighted_se),
                ("direct_mean", r.direct_mean),
                ("direct_stderr", r.direct_se),
                ("effective_sample_size", r.effective_sample_size),
                ("epsilon0", e.estimate),
                ("epsilon0_stderr", e.stderr),
                ("eta_bound", e.eta_bound),
                ("eta_star", e.eta_star),
                ("max_martingale_defect", g.max_martingale_defect),
                ("max_cm_energy", g.max_cm_energy),
            ];
            let rows: Vec<Vec<String>> = pairs.iter().map(|(k, v)| vec![k.to_string(), fmt(*v)]).collect();
            write_csv(&out.join("girsanov.csv"), &["quantity", "value"], &rows)?;
            let pass = r.brackets_one && r.agree;
            Ok(Outcome {
                pass,
                summary: format!(
                    "E[weight] {:.4} ± {:.4}, reweighted {:.4} vs direct {:.4}, epsilon0 {:.4}",
                    r.weight_mean, r.weight_se, r.reweighted_mean, r.direct_mean, e.estimate
                ),
            })
        }
        CouplingMode::Sweep => {
            let sweep = epsilon0_sweep(&cc, &cfg.coupling.sweep_norms)?;
            let rows: Vec<Vec<String>> = sweep
                .iter()
                .map(|(v, e)| vec![fmt(*v), fmt(e.estimate), fmt(e.stderr), fmt(e.eta_bound), fmt(e.eta_star)])
                .collect();
            write_csv(&out.join("epsilon0.csv"), &["v0_norm", "estimate", "stderr", "eta_bound", "eta_star"], &rows)?;
            let pass = sweep.iter().all(|(_, e)| e.estimate < 1.0);
            let list: Vec<String> = sweep.iter().map(|(v, e)| format!("{v}:{:.4}", e.estimate)).collect();
            Ok(Outcome { pass, summary: format!("epsilon0 {}", list.join(" ")) })
        }
    }
}

fn invariance(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let rep = invariance_experiment(&cfg.invariance()?)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                fmt(r.initial.mean),
                fmt(r.initial.stderr),
                fmt(r.terminal.mean),
                fmt(r.terminal.stderr),
                fmt(r.terminal_halved.mean),
                fmt(r.terminal_halved.stderr),
                fmt(r.bias),
                fmt(r.threshold),
                verdict(r.pass).to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("invariance.csv"),
        &[
            "observable",
            "initial_mean",
            "initial_stderr",
            "terminal_mean",
            "terminal_stderr",
            "halved_mean",
            "halved_stderr",
            "bias",
            "threshold",
            "verdict",
        ],
        &rows,
    )?;
    let failed: Vec<&str> = rep.rows.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    Ok(Outcome {
        pass: rep.pass,
        summary: format!(
            "{} observables, failing [{}], beta {:.4}, acceptance {:.4}",
            rep.rows.len(),
            failed.join(", "),
            rep.beta,
            rep.acceptance
        ),
    })
}

fn covcheck(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let rep = covariance_experiment(&cfg.covariance())?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.mode.0.to_string(),
                r.mode.1.to_string(),
                fmt(r.t),
                r.entry.clone(),
                fmt(r.closed_form),
                fmt(r.mc.mean),
                fmt(r.mc.stderr),
                verdict(r.pass).to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("covcheck.csv"),
        &["mode_x", "mode_y", "t", "entry", "closed_form", "mc_mean", "mc_stderr", "verdict"],
        &rows,
    )?;
    let failed = rep.rows.iter().filter(|r| !r.pass).count();
    Ok(Outcome { pass: rep.pass, summary: format!("{} rows, {failed} outside 3 sigma", rep.rows.len()) })
}

fn gate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let u0 = initial_state(cfg)?;
    let hc = cfg.hmc()?;
    let rep = hmc_gate(&u0, &hc)?;
    write_csv(
        &out.join("hmc_gate.csv"),
        &["statistic", "stderr", "threshold", "blew_up", "verdict"],
        &[vec![
            fmt(rep.statistic),
            fmt(rep.stderr),
            fmt(hc.threshold),
            rep.blew_up.to_string(),
            if rep.accept { "accept" } else { "reject" }.to_string(),
        ]],
    )?;
    Ok(Outcome { pass: rep.accept, summary: format!("statistic {:.6} vs K = {}", rep.statistic, hc.threshold) })
}

fn ediff(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let e = &cfg.ediff;
    if !(e.upper1 >= 0.0 && e.upper2 >= 0.0) {
        return Err(Error::Config("ediff.upper1 and ediff.upper2 must be non-negative".into()));
    }
    let mut rng = stream_rng(cfg.run.seed, streams::AUX);
    let mut f1 = Vec::with_capacity(e.samples);
    let mut f2 = Vec::with_capacity(e.samples);
    for _ in 0..e.samples {
        f1.push(e.upper1 * rng.random::<f64>());
        f2.push(e.upper2 * rng.random::<f64>());
    }
    let mut rows = Vec::new();
    let mut pass = true;
    for &eta in &e.etas {
        let rep = ediff_property(&f1, &f2, eta)?;
        pass &= rep.holds;
        rows.push(vec![fmt(eta), fmt(rep.lhs), fmt(rep.rhs), verdict(rep.holds).to_string()]);
    }
    write_csv(&out.join("ediff.csv"), &["eta", "lhs", "rhs", "verdict"], &rows)?;
    Ok(Outcome { pass, summary: format!("{} eta values, {} samples", rows.len(), e.samples) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::BlowUp { t: 1.0 }), EXIT_FAIL);
    }

    #[test]
    fn floats_print_seventeen_digits() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn commands_parse() {
        let cli =
            Cli::try_parse_from(["hphi2", "hmc-gate", "--set", "hmc.threshold=0", "--seed", "4", "--threads", "2"])
                .unwrap();
        assert_eq!(cli.command, Command::HmcGate);
        assert_eq!(cli.set, vec!["hmc.threshold=0".to_string()]);
        assert_eq!(cli.seed, Some(4));
        assert!(Cli::try_parse_from(["hphi2", "bogus"]).is_err());
    }
}

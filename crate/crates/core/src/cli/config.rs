//! Run configuration.
//!
//! A TOML file with the sections below; every key is optional and unknown
//! keys are rejected. Values are resolved in increasing precedence: built-in
//! defaults, the config file, environment variables `HPHI2__SECTION__KEY`,
//! `--set section.key=value` overrides, then `--seed` and `--out`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::coupling::CouplingParams;
use crate::error::{Error, Result};
use crate::experiments::{CouplingConfig, CovarianceConfig, HmcGateConfig, InvarianceConfig};
use crate::gibbs::ChainSchedule;
use crate::spectral::TorusSpec;
use crate::wick::Polynomial;

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "HPHI2__";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusSection {
    pub n_max: usize,
    /// Collocation size; `0` selects the smallest dealiased 5-smooth size.
    pub grid: usize,
    pub epsilon: f64,
    pub two_k: usize,
}

impl Default for TorusSection {
    fn default() -> Self {
        Self { n_max: 8, grid: 0, epsilon: 0.1, two_k: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Coefficients of `P` in ascending powers.
    pub coefficients: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { coefficients: vec![0.0, 0.0, 0.0, 0.0, 0.25] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    /// Ensemble size for `invariance`, `couple` and `sample-gibbs`.
    pub ensemble: usize,
    /// Recording stride in steps for `simulate`.
    pub stride: usize,
    /// Initial datum for `simulate` and `hmc-gate`: `zero`, `rho0`, `gibbs`
    /// or a snapshot path.
    pub initial: String,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            dt: 0.01,
            t_final: 5.0,
            ensemble: 400,
            stride: 10,
            initial: "rho0".into(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSection {
    /// Initial pCN step size.
    pub beta: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub tune: bool,
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self { beta: 0.5, burn_in: 10_000, thin: 100, target_accept: 0.3, tune: true }
    }
}

impl GibbsSection {
    pub fn schedule(&self) -> ChainSchedule {
        ChainSchedule { burn_in: self.burn_in, thin: self.thin, target_accept: self.target_accept, tune: self.tune }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// Pathwise contraction with automatic `A`.
    Contraction,
    /// Likelihood-weight identities at fixed `A`.
    Girsanov,
    /// Coupling-probability estimates over `sweep_norms`.
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub mode: CouplingMode,
    pub v0_norm: f64,
    pub a: f64,
    pub stop_level: f64,
    pub max_doublings: u32,
    pub stride: usize,
    pub residual_time: f64,
    pub etas: Vec<f64>,
    pub sweep_norms: Vec<f64>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        let p = CouplingParams::default();
        Self {
            mode: CouplingMode::Contraction,
            v0_norm: 0.1,
            a: p.a,
            stop_level: p.stop_level,
            max_doublings: p.max_doublings,
            stride: p.stride,
            residual_time: 2.0,
            etas: (1..20).map(|i| i as f64 / 20.0).collect(),
            sweep_norms: vec![0.5, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSection {
    /// Number of trajectories `M`.
    pub paths: usize,
    /// Acceptance threshold `K`.
    pub threshold: f64,
}

impl Default for HmcSection {
    fn default() -> Self {
        Self { paths: 16, threshold: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceSection {
    pub n_max: usize,
    pub modes: Vec<[i64; 2]>,
    pub times: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub limit_time: f64,
}

impl Default for CovarianceSection {
    fn default() -> Self {
        let c = CovarianceConfig::default();
        Self {
            n_max: c.n_max,
            modes: c.modes.iter().map(|&(a, b)| [a, b]).collect(),
            times: c.times,
            paths: c.paths,
            dt: c.dt,
            limit_time: c.limit_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdiffSection {
    pub samples: usize,
    pub etas: Vec<f64>,
    /// `f₁ ~ U[0, upper1]`.
    pub upper1: f64,
    /// `f₂ ~ U[0, upper2]`.
    pub upper2: f64,
}

impl Default for EdiffSection {
    fn default() -> Self {
        Self { samples: 10_000, etas: vec![0.0, 0.25, 0.5, 1.0, 1.5], upper1: 1.0, upper2: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceSection {
    /// Multiplies `σ_N²` in the dynamics; anything but 1 is a negative control.
    pub sigma2_factor: f64,
    pub batches: usize,
}

impl Default for InvarianceSection {
    fn default() -> Self {
        Self { sigma2_factor: 1.0, batches: 20 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub torus: TorusSection,
    pub model: ModelSection,
    pub run: RunSection,
    pub gibbs: GibbsSection,
    pub coupling: CouplingSection,
    pub hmc: HmcSection,
    pub covariance: CovarianceSection,
    pub ediff: EdiffSection,
    pub invariance: InvarianceSection,
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `section.key` in `table`.
pub fn set_key(table: &mut Table, dotted: &str, raw: &str) -> Result<()> {
    let (section, key) = dotted
        .split_once('.')
        .filter(|(s, k)| !s.is_empty() && !k.is_empty() && !k.contains('.'))
        .ok_or_else(|| Error::Config(format!("override key `{dotted}` is not `section.key`")))?;
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(inner) = entry else {
        return Err(Error::Config(format!("`{section}` is not a section")));
    };
    inner.insert(key.to_string(), parse_value(raw));
    Ok(())
}

/// Applies a `section.key=value` override.
pub fn apply_assignment(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `section.key=value`")))?;
    set_key(table, key.trim(), raw.trim())
}

/// Applies `HPHI2__SECTION__KEY=value` variables, in sorted order.
pub fn apply_env(table: &mut Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut found: Vec<(String, String)> =
        vars.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_string(), v))).collect();
    found.sort();
    for (rest, value) in found {
        let dotted = rest.to_lowercase().replacen("__", ".", 1);
        set_key(table, &dotted, &value)?;
    }
    Ok(())
}

/// Layered sources of a configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub file: Option<String>,
    pub env: Vec<(String, String)>,
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(sources: &Overrides) -> Result<Self> {
        let mut table = match &sources.file {
            Some(text) => text.parse::<Table>().map_err(|e| Error::Config(e.to_string()))?,
            None => Table::new(),
        };
        apply_env(&mut table, sources.env.iter().cloned())?;
        for a in &sources.set {
            apply_assignment(&mut table, a)?;
        }
        if let Some(seed) = sources.seed {
            let seed = i64::try_from(seed)
                .map_err(|_| Error::Config(format!("seed {seed} exceeds the TOML integer range")))?;
            set_key(&mut table, "run.seed", &seed.to_string())?;
        }
        if let Some(out) = &sources.out {
            let run = table.entry("run").or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = run {
                t.insert("out".into(), Value::String(out.display().to_string()));
            }
        }
        let cfg: RunConfig =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        self.spec()?;
        self.interaction().validate_interaction(self.torus.two_k)?;
        if !(self.run.dt > 0.0) || !(self.run.t_final >= 0.0) {
            return Err(Error::Config("run.dt must be positive and run.t_final non-negative".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<TorusSpec> {
        let t = &self.torus;
        if t.grid == 0 {
            TorusSpec::dealiased(t.n_max, t.epsilon, t.two_k)
        } else {
            TorusSpec::new(t.n_max, t.grid, t.epsilon, t.two_k)
        }
    }

    pub fn interaction(&self) -> Polynomial {
        Polynomial::new(self.model.coefficients.clone())
    }

    pub fn invariance(&self) -> Result<InvarianceConfig> {
        Ok(InvarianceConfig {
            spec: self.spec()?,
            interaction: self.interaction(),
            dt: self.run.dt,
            t_final: self.run.t_final,
            ensemble: self.run.ensemble,
            chain: self.gibbs.schedule(),
            beta: self.gibbs.beta,
            sigma2_factor: self.invariance.sigma2_factor,
            batches: self.invariance.batches,
            seed: self.run.seed,
        })
    }

    pub fn coupling(&self) -> Result<CouplingConfig> {
        let c = &self.coupling;
        Ok(CouplingConfig {
            spec: self.spec()?,
            interaction: self.interaction(),
            dt: self.run.dt,
            t_final: self.run.t_final,
            paths: self.run.ensemble,
            v0_norm: c.v0_norm,
            params: CouplingParams {
                a: c.a,
                stop_level: c.stop_level,
                max_doublings: c.max_doublings,
                stride: c.stride,
                keep_shifts: false,
            },
            chain: self.gibbs.schedule(),
            beta: self.gibbs.beta,
            etas: c.etas.clone(),
            residual_time: c.residual_time,
            seed: self.run.seed,
        })
    }

    pub fn hmc(&self) -> Result<HmcGateConfig> {
        Ok(HmcGateConfig {
            spec: self.spec()?,
            interaction: self.interaction(),
            dt: self.run.dt,
            t_final: self.run.t_final,
            paths: self.hmc.paths,
            threshold: self.hmc.threshold,
            seed: self.run.seed,
        })
    }

    pub fn covariance(&self) -> CovarianceConfig {
        let c = &self.covariance;
        CovarianceConfig {
            n_max: c.n_max,
            modes: c.modes.iter().map(|&[a, b]| (a, b)).collect(),
            times: c.times.clone(),
            paths: c.paths,
            dt: c.dt,
            limit_time: c.limit_time,
            seed: self.run.seed,
        }
    }
}

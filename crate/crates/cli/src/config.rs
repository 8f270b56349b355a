//! Run configuration: TOML file, then `--key=value` overrides, then strict
//! deserialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikefield::engine::Backend;
use spikefield::model::{ModelConfig, RateConfig, RateKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub extinction: ExtinctionConfig,
    #[serde(default)]
    pub exit_times: ExitTimesConfig,
    #[serde(default)]
    pub meanfield: MeanfieldConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub ldp: LdpSection,
    #[serde(default)]
    pub couple: CoupleConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// `k = 1, h = 10, λ* = 1, α = 1` with 100 neurons.
pub fn default_model() -> ModelConfig {
    ModelConfig {
        n: 100,
        alpha: 1.0,
        h: 10.0,
        rate: RateConfig {
            kind: RateKind::PiecewiseLinear,
            k: Some(1.0),
            lambda_star: 1.0,
            slope: None,
        },
    }
}

/// Initial potentials: i.i.d. uniform on `[lo, hi]`, or the pattern
/// `values` repeated cyclically over the neurons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Uniform { lo: f64, hi: f64 },
    Pattern { values: Vec<f64> },
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Uniform { lo: 0.0, hi: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub horizon: f64,
    /// Trajectory sampling step.
    pub dt: f64,
    pub backend: Backend,
    pub cap: u64,
    pub init: InitConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            horizon: 10.0,
            dt: 0.1,
            backend: Backend::Thinning,
            cap: 100_000_000,
            init: InitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtinctionConfig {
    pub replicas: usize,
    pub cap: u64,
    pub init: InitConfig,
}

impl Default for ExtinctionConfig {
    fn default() -> Self {
        ExtinctionConfig {
            replicas: 100,
            cap: 10_000_000,
            init: InitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    LevelSet,
    Band,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExitTimesConfig {
    pub domain: DomainKind,
    /// Exit level (level set) or trap half-width (band).
    pub gamma: f64,
    /// Trap level (level set) or domain half-width (band).
    pub delta: f64,
    /// Band centre; defaults to the equilibrium rate `p*`.
    pub p_star: Option<f64>,
    /// Initial states, each a pattern repeated over the neurons.
    pub inits: Vec<Vec<f64>>,
    pub replicas: usize,
    pub cap: u64,
    /// Also estimate the framework probabilities with horizons `s1 ≥ s2`.
    pub eps: bool,
    pub s1: f64,
    pub s2: f64,
    pub eps_replicas: usize,
}

impl Default for ExitTimesConfig {
    fn default() -> Self {
        ExitTimesConfig {
            domain: DomainKind::Band,
            gamma: 0.01,
            delta: 0.03,
            p_star: None,
            inits: vec![vec![0.95], vec![0.9, 1.0]],
            replicas: 100,
            cap: 1_000_000,
            eps: false,
            s1: 10.0,
            s2: 5.0,
            eps_replicas: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldConfig {
    /// Horizon of the Picard iteration for `z_t`; 0 skips it.
    pub picard_horizon: f64,
    pub picard_replicas: usize,
    pub init: InitConfig,
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        MeanfieldConfig {
            picard_horizon: 0.0,
            picard_replicas: 2000,
            init: InitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    /// Grid points per axis.
    pub resolution: usize,
    /// Extra `[a, b]` points appended after the grid.
    pub points: Vec<[f64; 2]>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            a_min: 0.0,
            a_max: 1.5,
            b_min: 0.0,
            b_max: 1.5,
            resolution: 151,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSection {
    pub eta: f64,
    /// Population sizes of the scaling experiment; empty skips it.
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub cap: u64,
}

impl Default for LdpSection {
    fn default() -> Self {
        LdpSection {
            eta: 0.1,
            ns: Vec::new(),
            replicas: 200,
            cap: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Network with its dominated auxiliary process.
    UZ,
    /// Network with independent mean-field neurons.
    Chaos,
    /// Two networks driven by the same noise.
    Synchronous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupleConfig {
    pub kind: CouplingKind,
    pub horizon: f64,
    pub dt: f64,
    pub init: InitConfig,
    /// Second system of the synchronous coupling.
    pub other: InitConfig,
    /// Particles of the surrogate mean-field rate (chaos coupling).
    pub surrogate: usize,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        CoupleConfig {
            kind: CouplingKind::Synchronous,
            horizon: 10.0,
            dt: 0.1,
            init: InitConfig::Uniform { lo: 0.3, hi: 1.3 },
            other: InitConfig::Uniform { lo: 1.5, hi: 4.0 },
            surrogate: 20_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}` must have the form --key=value")]
    Override(String),
}

/// Sets a dotted `key` in `table`, creating intermediate tables.
fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::Override(key.into()))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Parse(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads a value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Merges the optional file and the `--key=value` overrides into a
/// [`RunConfig`]. Missing `[model]` keys take their default values.
pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.into(),
                source,
            })?;
            text.parse::<toml::Table>()
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        let body = o.strip_prefix("--").ok_or_else(|| ConfigError::Override(o.clone()))?;
        let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        let k = k.replace('-', "_");
        set_dotted(&mut table, &k, parse_value(v))?;
    }
    if let Some(model) = table.get_mut("model").and_then(|m| m.as_table_mut()) {
        fill_model_defaults(model);
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    Ok(cfg)
}

/// Fills the keys of a partial `[model]` section from [`default_model`],
/// so that single keys can be changed without restating the rest.
fn fill_model_defaults(model: &mut toml::Table) {
    let defaults = toml::Value::try_from(default_model()).expect("model serializes");
    let toml::Value::Table(defaults) = defaults else {
        unreachable!()
    };
    for (k, v) in defaults {
        match (model.get_mut(&k), v) {
            (None, v) => {
                model.insert(k, v);
            }
            (Some(toml::Value::Table(sub)), toml::Value::Table(dv)) => {
                let kind_changed = sub.get("kind").is_some_and(|x| x.as_str() != Some("piecewise_linear"));
                if !kind_changed {
                    for (kk, vv) in dv {
                        sub.entry(kk).or_insert(vv);
                    }
                } else if let Some(ls) = dv.get("lambda_star") {
                    sub.entry("lambda_star").or_insert(ls.clone());
                }
            }
            _ => {}
        }
    }
}

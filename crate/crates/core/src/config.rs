//! Scenario files: one TOML document per scenario, with an optional `sweep`
//! table of scalar overrides expanded in lexicographic key order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::market::{
    constraint_set, ConsumptionMode, ConstraintSet, JumpAtom, JumpDensity, JumpMeasure, LevyMarket, PiecewiseDiscount, Preferences, TimeGrid,
};
use crate::montecarlo::McConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketConfig,
    pub preferences: PreferencesConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
    /// Dotted key -> list of values; only used by [`expand_sweep`].
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub drift: Vec<f64>,
    /// Diffusion matrix `c`; zero when omitted.
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jump_atoms: Vec<AtomConfig>,
    #[serde(default)]
    pub jump_density: Option<DensityConfig>,
    #[serde(default)]
    pub constraints: Option<BoxConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub size: Vec<f64>,
    pub intensity: f64,
}

/// One-dimensional jump density restricted to `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    /// Constant density `intensity / (upper - lower)`.
    Uniform {
        intensity: f64,
        lower: f64,
        upper: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// `intensity` times the normal density with `mean` and `std`.
    Normal {
        intensity: f64,
        mean: f64,
        std: f64,
        lower: f64,
        upper: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

fn default_nodes() -> usize {
    crate::market::DEFAULT_DENSITY_NODES
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferencesConfig {
    pub p: f64,
    #[serde(default)]
    pub mode: ConsumptionMode,
    #[serde(default)]
    pub discount_breakpoints: Vec<f64>,
    #[serde(default = "unit_discount")]
    pub discount_values: Vec<f64>,
}

fn unit_discount() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid_steps: usize,
    pub n_paths: usize,
    pub seed: Option<u64>,
    pub x0: f64,
    pub checkpoints: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { grid_steps: 1000, n_paths: 100_000, seed: None, x0: 1.0, checkpoints: 10, out_dir: None }
    }
}

/// Parameters of the experiment suites.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    /// Nested one-dimensional constraint intervals, largest first.
    pub intervals: Vec<[f64; 2]>,
    /// Tax window `[t1, t2)` and its factor `ξ`.
    pub window: [f64; 2],
    pub xi: f64,
    /// Exponents in `(0, 1)` for the dichotomy check.
    pub q_values: Vec<f64>,
    /// Shift of the optimal portfolio in the suboptimality test.
    pub perturbation: f64,
    /// Log-variance of the lognormal ratio family.
    pub sigma2: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            intervals: vec![[-1.0, 1.0], [0.0, 0.0]],
            window: [0.3, 0.6],
            xi: 0.5,
            q_values: vec![0.25, 0.5, 0.75],
            perturbation: 0.5,
            sigma2: 0.04,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ScenarioConfig {
    /// Parses one scenario; a `sweep` table is kept but not expanded.
    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(config_err)?;
        Self::from_table(value)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ScenarioConfig = table.try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.run.grid_steps == 0 || self.run.checkpoints == 0 {
            return Err(Error::Config("grid_steps and checkpoints must be positive".into()));
        }
        if !(self.run.x0 > 0.0) || !self.run.x0.is_finite() {
            return Err(Error::Config(format!("initial wealth must be positive, got {}", self.run.x0)));
        }
        // builds everything once so that errors surface at load time
        self.market()?;
        self.preferences()?;
        Ok(())
    }

    pub fn market(&self) -> Result<LevyMarket<f64>> {
        let m = &self.market;
        let dim = m.drift.len();
        let atoms = m.jump_atoms.iter().map(|a| JumpAtom { size: a.size.clone(), intensity: a.intensity }).collect();
        let density = m.jump_density.as_ref().map(DensityConfig::build).transpose()?;
        let jumps = JumpMeasure::new(dim, atoms, density)?;
        let diffusion = m.diffusion.clone().unwrap_or_else(|| vec![vec![0.0; dim]; dim]);
        LevyMarket::new(m.drift.clone(), diffusion, jumps, m.horizon)
    }

    pub fn preferences(&self) -> Result<Preferences<f64>> {
        let p = &self.preferences;
        let d = PiecewiseDiscount::new(p.discount_breakpoints.clone(), p.discount_values.clone(), self.market.horizon)?;
        Preferences::new(p.p, d, p.mode)
    }

    pub fn user_constraints(&self) -> Option<ConstraintSet<f64>> {
        self.market.constraints.as_ref().map(|b| ConstraintSet::boxed(b.lower.clone(), b.upper.clone()))
    }

    /// Budget constraint intersected with the configured box.
    pub fn constraint_set(&self) -> Result<ConstraintSet<f64>> {
        constraint_set(&self.market()?, self.user_constraints().as_ref())
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::new(self.market.horizon, self.run.grid_steps)
    }

    /// Monte Carlo settings; the seed is mandatory here.
    pub fn mc(&self) -> Result<McConfig> {
        let seed = self.run.seed.ok_or_else(|| Error::Config("a seed is required for stochastic runs".into()))?;
        Ok(McConfig { n_paths: self.run.n_paths, seed, checkpoints: self.run.checkpoints })
    }
}

impl DensityConfig {
    fn build(&self) -> Result<JumpDensity<f64>> {
        match *self {
            DensityConfig::Uniform { intensity, lower, upper, nodes } => {
                if !(upper > lower) {
                    return Err(Error::Config("uniform density needs lower < upper".into()));
                }
                let h = intensity / (upper - lower);
                Ok(JumpDensity { density: Arc::new(move |x| if (lower..=upper).contains(&x) { h } else { 0.0 }), lower, upper, nodes })
            }
            DensityConfig::Normal { intensity, mean, std, lower, upper, nodes } => {
                if !(std > 0.0) {
                    return Err(Error::Config("normal density needs std > 0".into()));
                }
                let c = intensity / (std * (2.0 * std::f64::consts::PI).sqrt());
                Ok(JumpDensity { density: Arc::new(move |x| c * (-0.5 * ((x - mean) / std).powi(2)).exp()), lower, upper, nodes })
            }
        }
    }
}

/// A scenario with its identifier (file stem plus sweep index).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub config: ScenarioConfig,
}

/// Expands the `sweep` table of `text` into one scenario per combination.
/// Keys are visited in lexicographic order; the last key varies fastest.
pub fn expand_sweep(base_id: &str, text: &str) -> Result<Vec<Scenario>> {
    let mut table: toml::Table = text.parse().map_err(config_err)?;
    let sweep: BTreeMap<String, Vec<toml::Value>> = match table.remove("sweep") {
        Some(v) => v.try_into().map_err(config_err)?,
        None => BTreeMap::new(),
    };
    if sweep.is_empty() {
        return Ok(vec![Scenario { id: base_id.to_string(), config: ScenarioConfig::from_table(table)? }]);
    }
    if let Some((k, _)) = sweep.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Config(format!("sweep key `{k}` has no values")));
    }
    let keys: Vec<&String> = sweep.keys().collect();
    let sizes: Vec<usize> = sweep.values().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for n in 0..total {
        let mut t = table.clone();
        let mut rem = n;
        let mut labels = Vec::with_capacity(keys.len());
        for (j, key) in keys.iter().enumerate().rev() {
            let idx = rem % sizes[j];
            rem /= sizes[j];
            let v = &sweep[*key][idx];
            if !(v.is_integer() || v.is_float() || v.is_bool() || v.is_str()) {
                return Err(Error::Config(format!("sweep values must be scalars (key `{key}`)")));
            }
            set_dotted(&mut t, key, v.clone())?;
            labels.push(format!("{key}={v}"));
        }
        labels.reverse();
        let id = format!("{base_id}[{}]", labels.join(","));
        out.push(Scenario { id, config: ScenarioConfig::from_table(t)? });
    }
    Ok(out)
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("bad sweep key `{key}`")))?;
    let mut cur = table;
    for part in parts {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("sweep key `{key}` does not address a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Loads a scenario file and expands its sweep; ids start with the file stem.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    expand_sweep(stem, &text)
}

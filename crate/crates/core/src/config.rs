//! Declarative experiment configuration (TOML).
//!
//! Every key can be overridden with `key=value` pairs, where nested keys use
//! dots (`stability.enabled=true`) and values are TOML literals; anything
//! that does not parse as a literal is taken as a string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::magnitude::Solver;
use crate::stability::{Direction, EvalSplit, InitMode};
use crate::trainer::TaskKind;

/// Environment variable holding the default output root.
pub const OUT_ENV: &str = "TRAJTOPO_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleKind {
    Constant,
    /// `eta_k = c / k` with `c` taken from the `eta` list.
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PmagConfig {
    pub fixed_scales: Vec<f64>,
    /// `lambda` values for the theorem schedule `s = lambda L beta^(-1/3) / B`.
    pub theorem_lambdas: Vec<f64>,
    pub solver: String,
}

impl Default for PmagConfig {
    fn default() -> Self {
        Self {
            fixed_scales: vec![100.0],
            theorem_lambdas: vec![1.0],
            solver: "cg".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub enabled: bool,
    /// Replacement count; the default rule applies when absent.
    pub j: Option<usize>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub init_mode: InitMode,
    pub eval_split: EvalSplit,
    pub direction: Direction,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            j: None,
            seeds: vec![0, 1, 2],
            iterations: 500,
            init_mode: InitMode::RandomInit,
            eval_split: EvalSplit::Train,
            direction: Direction::Directed,
        }
    }
}

/// User-supplied constants; unset values are estimated from each run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub lipschitz: Option<f64>,
    pub loss_bound: Option<f64>,
    pub gradient_lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub input_dim: usize,
    pub separation: f64,
    pub n: Vec<usize>,
    pub eta: Vec<f64>,
    pub batch: Vec<usize>,
    pub seeds: Vec<u64>,
    pub step_rule: StepRuleKind,
    pub radius: f64,
    /// Iterations run before recording starts.
    pub warmup: usize,
    /// Recorded iterations `T`.
    pub iterations: usize,
    pub subsample: usize,
    pub test_size: usize,
    pub alpha: f64,
    pub pmag: PmagConfig,
    pub stability: StabilityConfig,
    pub constants: ConstantsConfig,
    /// Also write full trajectories, loss matrices and distance matrices per cell.
    pub keep_artifacts: bool,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::LogisticRegression,
            input_dim: 20,
            separation: 1.0,
            n: vec![100, 500, 1000, 5000, 10000],
            eta: vec![0.01, 0.05],
            batch: vec![1],
            seeds: vec![0],
            step_rule: StepRuleKind::Constant,
            radius: 10.0,
            warmup: 0,
            iterations: 5000,
            subsample: 1500,
            test_size: 500,
            alpha: 1.0,
            pmag: PmagConfig::default(),
            stability: StabilityConfig::default(),
            constants: ConstantsConfig::default(),
            keep_artifacts: false,
            out: None,
            jobs: 1,
        }
    }
}

fn parse_literal(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot separated) to `value` inside `table`, creating tables on the way.
pub fn apply_override(table: &mut toml::Table, path: &str, value: &str) -> Result<()> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::invalid(format!("bad override key {path:?}")))?;
    let mut cur = table;
    for k in keys {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid(format!("{k} in {path:?} is not a table")))?;
    }
    let mut v = parse_literal(value);
    // a bare number given for a list-valued key means a one-element list
    if matches!(cur.get(last), Some(Value::Array(_))) && !v.is_array() {
        v = Value::Array(vec![v]);
    }
    cur.insert(last.to_string(), v);
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::invalid(format!("malformed config: {e}")))?;
        let defaults = toml::Table::try_from(ExperimentConfig::default()).map_err(|e| Error::invalid(e.to_string()))?;
        for (k, v) in defaults {
            table.entry(k).or_insert(v);
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override {o:?} is not key=value")))?;
            apply_override(&mut table, k.trim(), v.trim())?;
        }
        let cfg: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e| Error::invalid(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.eta.is_empty() || self.batch.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("grid is empty: n, eta, batch and seeds all need at least one value"));
        }
        if self.n.contains(&0) {
            return Err(Error::invalid("n values must be positive"));
        }
        if self.batch.contains(&0) {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        if self.eta.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if self.input_dim == 0 || self.iterations == 0 || self.subsample == 0 || self.test_size == 0 {
            return Err(Error::invalid("input_dim, iterations, subsample and test_size must be positive"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and >= 0"));
        }
        self.pmag.solver.parse::<Solver>()?;
        if self.pmag.fixed_scales.iter().chain(&self.pmag.theorem_lambdas).any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("scales and lambdas must be positive"));
        }
        if self.stability.enabled && self.stability.seeds.is_empty() {
            return Err(Error::invalid("stability seeds must be nonempty"));
        }
        if let Some(j) = self.stability.j {
            if let Some(n) = self.n.iter().find(|n| **n < j) {
                return Err(Error::invalid(format!("stability J = {j} exceeds n = {n}")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn solver(&self) -> Solver {
        self.pmag.solver.parse().expect("validated")
    }

    /// Output root: the config value, then `TRAJTOPO_OUT`, then `trajtopo-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("trajtopo-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let c = ExperimentConfig::from_toml_str("task = \"quadratic\"\nn = [50]", &[]).unwrap();
        assert_eq!(c.task, TaskKind::Quadratic);
        assert_eq!(c.n, vec![50]);
        assert_eq!(c.iterations, 5000);
        assert_eq!(c.subsample, 1500);
        assert_eq!(c.pmag.fixed_scales, vec![100.0]);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let o = vec![
            "iterations=50".to_string(),
            "stability.enabled=true".to_string(),
            "eta=0.2".to_string(),
            "pmag.solver=direct".to_string(),
        ];
        let c = ExperimentConfig::from_toml_str("", &o).unwrap();
        assert_eq!(c.iterations, 50);
        assert!(c.stability.enabled);
        assert_eq!(c.eta, vec![0.2]);
        assert_eq!(c.pmag.solver, "direct");
    }

    #[test]
    fn empty_grid_and_unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("n = []", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("n = [", &[]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml().unwrap(), &[]).unwrap(), c);
    }
}

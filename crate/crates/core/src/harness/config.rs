use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::datagen::{ProcessParams, QueryPairing};
use crate::error::{Error, Result};
use crate::oracle::MIN_ORACLE_SAMPLES;
use crate::rff::ScaleMode;

/// One grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: f64,
}

impl Default for GridPoint {
    fn default() -> Self {
        GridPoint {
            p: 1000,
            t: 12,
            k: 15,
            gamma: 2.0,
        }
    }
}

/// How one-at-a-time marginal tables are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarginalScheme {
    /// Hold the other parameters at `base_point`.
    #[default]
    BasePoint,
    /// Pool every grid cell sharing the marginal value (runs the full grid).
    GridAverage,
}

impl MarginalScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            MarginalScheme::BasePoint => "base_point",
            MarginalScheme::GridAverage => "grid_average",
        }
    }
}

/// Which cells a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepLayout {
    /// Marginals through the base point plus the P x T and P x gamma planes.
    #[default]
    Marginals,
    /// Every cell of the Cartesian grid.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "P")]
    pub p_grid: Vec<usize>,
    #[serde(rename = "T")]
    pub t_grid: Vec<usize>,
    pub gamma: Vec<f64>,
    #[serde(rename = "K")]
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub process: ProcessParams,
    pub mode: ScaleMode,
    /// Draws per limit-kernel estimate; absent disables the oracle metric.
    pub oracle_samples: Option<usize>,
    pub root_seed: u64,
    pub output_path: PathBuf,
    /// Query states simulated after each training window.
    pub queries: usize,
    pub pairing: QueryPairing,
    pub base_point: GridPoint,
    pub marginals: MarginalScheme,
    pub layout: SweepLayout,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p_grid: vec![100, 500, 1000, 2500, 5000, 10_000, 15_000, 20_000],
            t_grid: vec![6, 12, 24, 60],
            gamma: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            k_grid: vec![5, 10, 15, 20, 30],
            trials: 1000,
            process: ProcessParams::default(),
            mode: ScaleMode::Rms,
            oracle_samples: None,
            root_seed: 1234,
            output_path: PathBuf::from("results"),
            queries: 10,
            pairing: QueryPairing::SelfPairs,
            base_point: GridPoint::default(),
            marginals: MarginalScheme::BasePoint,
            layout: SweepLayout::Marginals,
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let grids: [(&str, &[usize], usize); 3] = [("P", &self.p_grid, 1), ("T", &self.t_grid, 2), ("K", &self.k_grid, 1)];
        for (name, grid, min) in grids {
            if grid.is_empty() {
                return Err(config_err(name, "grid is empty"));
            }
            if let Some(v) = grid.iter().find(|v| **v < min) {
                return Err(config_err(name, format!("grid values must be >= {min}, got {v}")));
            }
        }
        if self.gamma.is_empty() {
            return Err(config_err("gamma", "grid is empty"));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(config_err("gamma", format!("bandwidths must be positive, got {g}")));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "need at least one trial"));
        }
        if self.queries == 0 || (self.pairing != QueryPairing::SelfPairs && self.queries < 2) {
            return Err(config_err("queries", "too few query states for the pairing rule"));
        }
        if let Some(n) = self.oracle_samples {
            if n < MIN_ORACLE_SAMPLES {
                return Err(config_err("oracle_samples", format!("need at least {MIN_ORACLE_SAMPLES}, got {n}")));
            }
        }
        let b = self.base_point;
        if b.p == 0 || b.t < 2 || b.k == 0 || !(b.gamma > 0.0) {
            return Err(config_err("base_point", "coordinates must be positive with T >= 2"));
        }
        for &k in &self.k_grid {
            self.process
                .with_dim(k)
                .map_err(|e| config_err("process", e.to_string()))?;
        }
        Ok(())
    }

    /// Reads a JSON config; keys absent from the file keep their defaults.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("cannot read {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn from_value(mut value: Value) -> Result<Self> {
        integralize(&mut value);
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| config_err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, where `key` is a dotted path into the
    /// config (`process.rho`, `base_point.P`) and `value` is JSON or, failing
    /// that, a bare string. Lists may be given as `100,1000`.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| config_err(o, "override must look like key=value"))?;
            set_path(&mut value, key.trim(), parse_value(raw.trim()))?;
        }
        integralize(&mut value);
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| config_err("--set", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Rewrites integral floats such as `1e6` as integers so they can fill
/// count fields.
fn integralize(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if f.fract() == 0.0 && f.abs() < 9.0e15 {
                    *v = if f >= 0.0 { Value::from(f as u64) } else { Value::from(f as i64) };
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(integralize),
        Value::Object(map) => map.values_mut().for_each(integralize),
        _ => {}
    }
}

fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str(raw) {
        return v;
    }
    if raw.contains(',') {
        let items: Option<Vec<Value>> = raw.split(',').map(|s| serde_json::from_str(s.trim()).ok()).collect();
        if let Some(items) = items {
            return Value::Array(items);
        }
    }
    Value::String(raw.to_string())
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err(key, "path does not name a config section"))?;
        if !obj.contains_key(*part) {
            return Err(config_err(key, "unknown config key"));
        }
        if i + 1 == parts.len() {
            // a single value for a grid means a one-point grid
            let v = match (&obj[*part], v) {
                (Value::Array(_), v @ (Value::Number(_) | Value::String(_))) => Value::Array(vec![v]),
                (_, v) => v,
            };
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj.get_mut(*part).expect("checked above");
    }
    Err(config_err(key, "empty key"))
}

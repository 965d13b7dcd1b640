use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::HomogeneityParams;
use crate::locator::{Backend, LocatorParams};
use crate::world::FieldSpec;

use super::HarnessError;

/// Every knob of every experiment. Missing TOML keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub collection: CollectionConfig,
    pub locator: LocatorConfig,
    pub success: SuccessConfig,
    pub cost: CostConfig,
    pub trajectory: TrajectoryConfig,
    pub distribution: DistributionConfig,
    /// Previously collected graph to use instead of a fresh collection run.
    /// Must come from the same world.
    pub graph_file: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    #[serde(flatten)]
    pub field: FieldSpec,
    /// Field seed; derived from the master seed when absent.
    pub seed: Option<u64>,
    /// Overlap threshold, dBm.
    pub tau: f64,
    /// Scanner sensitivity, dBm.
    pub sensitivity: f64,
    /// Log-normal shadowing on collection scans, dB. Zero keeps scans exact.
    pub shadowing_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectionConfig {
    pub sessions: usize,
    pub steps: usize,
    pub step_length: f64,
    /// Sample spacing of the coverage-complete sweep, m.
    pub sweep_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorConfig {
    pub grid_spacing: f64,
    #[serde(flatten)]
    pub params: LocatorParams,
    pub backends: Vec<Backend>,
    /// Score-parity factors. The first is the headline one.
    pub parity_factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuccessConfig {
    pub trials: usize,
    pub h_values: Vec<usize>,
    pub h_epsilon: f64,
    pub epsilons: Vec<f64>,
    pub epsilon_h: usize,
    /// Session counts of the nested graph prefixes.
    pub scale_prefixes: Vec<usize>,
    pub scale_h: usize,
    pub scale_epsilon: f64,
    /// Noise sets per request in the fabricated-noise control.
    pub control_h: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub h: usize,
    pub h_values: Vec<usize>,
    pub epsilon: f64,
    pub requests: usize,
    pub runs: usize,
    pub warmups: usize,
    pub brute_force_timeout_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub walks: usize,
    pub steps: usize,
    pub step_length: f64,
    pub h: usize,
    pub epsilon: f64,
    pub backend: Backend,
    pub attack: HomogeneityParams,
    /// Walks whose per-step positions are dumped for plotting.
    pub trace_walks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionConfig {
    pub h: usize,
    pub epsilon: f64,
    pub train_requests: usize,
    pub requests: usize,
    pub window: usize,
    pub hotspots: usize,
    pub hotspot_spread: f64,
    /// Share of requests issued from hotspots rather than uniformly.
    pub hotspot_share: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            collection: CollectionConfig::default(),
            locator: LocatorConfig::default(),
            success: SuccessConfig::default(),
            cost: CostConfig::default(),
            trajectory: TrajectoryConfig::default(),
            distribution: DistributionConfig::default(),
            graph_file: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            field: FieldSpec::default(),
            seed: None,
            tau: -75.0,
            sensitivity: -80.0,
            shadowing_sigma: 0.0,
        }
    }
}

impl Default for CollectionConfig {
    fn default() -> Self {
        CollectionConfig {
            sessions: 8,
            steps: 400,
            step_length: 5.0,
            sweep_spacing: 2.5,
        }
    }
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            grid_spacing: 5.0,
            params: LocatorParams::default(),
            backends: Backend::ALL.to_vec(),
            parity_factors: vec![2.0, 1.5, 3.0],
        }
    }
}

impl Default for SuccessConfig {
    fn default() -> Self {
        SuccessConfig {
            trials: 1000,
            h_values: vec![1, 5, 10, 20],
            h_epsilon: 0.95,
            epsilons: vec![0.5, 0.7, 0.9, 0.95, 1.0],
            epsilon_h: 1,
            scale_prefixes: vec![1, 2, 4, 8],
            scale_h: 1,
            scale_epsilon: 0.95,
            control_h: 5,
        }
    }
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            h: 5,
            h_values: vec![3, 5, 10, 15, 20],
            epsilon: 0.95,
            requests: 64,
            runs: 11,
            warmups: 2,
            brute_force_timeout_secs: 60.0,
        }
    }
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            walks: 200,
            steps: 50,
            step_length: 20.0,
            h: 4,
            epsilon: 0.5,
            backend: Backend::Radar,
            attack: HomogeneityParams::default(),
            trace_walks: 3,
        }
    }
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            h: 4,
            epsilon: 0.95,
            train_requests: 2000,
            requests: 10_000,
            window: 1000,
            hotspots: 3,
            hotspot_spread: 25.0,
            hotspot_share: 0.8,
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn non_empty<T>(name: &str, v: &[T]) -> Result<(), HarnessError> {
    if v.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    Ok(())
}

fn at_least_one(name: &str, v: usize) -> Result<(), HarnessError> {
    if v == 0 {
        return Err(invalid(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn epsilon_ok(name: &str, e: f64) -> Result<(), HarnessError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(invalid(format!("{name} must lie in [0, 1], got {e}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Replaces one field addressed by its dotted TOML path, e.g.
    /// `success.trials=200`. Values that do not parse as TOML are taken as
    /// strings. Types are checked here; cross-field rules are left to
    /// [`ExperimentConfig::validate`] so overrides can be applied in any order.
    pub fn with_override(&self, assignment: &str) -> Result<Self, HarnessError> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override {assignment:?} is not key=value")))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
        let mut root = toml::Table::try_from(self).expect("config is always representable");
        let keys: Vec<&str> = path.trim().split('.').collect();
        let (last, parents) = keys.split_last().expect("split yields at least one key");
        let mut table = &mut root;
        for k in parents {
            table = table
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| invalid(format!("{path}: {k} is not a section")))?;
        }
        table.insert(last.to_string(), value);
        toml::Value::Table(root)
            .try_into()
            .map_err(|e| invalid(format!("{path}: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.world
            .field
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if !(self.world.tau.is_finite() && self.world.sensitivity.is_finite()) {
            return Err(invalid("tau and sensitivity must be finite"));
        }
        if !(self.world.shadowing_sigma.is_finite() && self.world.shadowing_sigma >= 0.0) {
            return Err(invalid("shadowing sigma must be non-negative"));
        }

        let c = &self.collection;
        at_least_one("collection.steps", c.steps)?;
        if !(c.step_length.is_finite() && c.step_length > 0.0) {
            return Err(invalid("collection.step_length must be positive"));
        }
        if !(c.sweep_spacing.is_finite() && c.sweep_spacing > 0.0) {
            return Err(invalid("collection.sweep_spacing must be positive"));
        }

        let l = &self.locator;
        if !(l.grid_spacing.is_finite() && l.grid_spacing > 0.0) {
            return Err(invalid("locator.grid_spacing must be positive"));
        }
        at_least_one("locator.k_aps", l.params.k_aps)?;
        at_least_one("locator.k_nn", l.params.k_nn)?;
        if !(l.params.pbl_sigma.is_finite() && l.params.pbl_sigma > 0.0) {
            return Err(invalid("locator.pbl_sigma must be positive"));
        }
        non_empty("locator.backends", &l.backends)?;
        non_empty("locator.parity_factors", &l.parity_factors)?;
        if l.parity_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(invalid("parity factors must be positive"));
        }

        let s = &self.success;
        at_least_one("success.trials", s.trials)?;
        non_empty("success.h_values", &s.h_values)?;
        non_empty("success.epsilons", &s.epsilons)?;
        non_empty("success.scale_prefixes", &s.scale_prefixes)?;
        for &e in &s.epsilons {
            epsilon_ok("success.epsilons", e)?;
        }
        epsilon_ok("success.h_epsilon", s.h_epsilon)?;
        epsilon_ok("success.scale_epsilon", s.scale_epsilon)?;
        if s.scale_prefixes.iter().any(|&p| p == 0 || p > c.sessions) {
            return Err(invalid(format!(
                "success.scale_prefixes must lie in 1..={}",
                c.sessions
            )));
        }

        let k = &self.cost;
        non_empty("cost.h_values", &k.h_values)?;
        at_least_one("cost.requests", k.requests)?;
        at_least_one("cost.runs", k.runs)?;
        epsilon_ok("cost.epsilon", k.epsilon)?;
        if !(k.brute_force_timeout_secs.is_finite() && k.brute_force_timeout_secs > 0.0) {
            return Err(invalid("cost.brute_force_timeout_secs must be positive"));
        }

        let t = &self.trajectory;
        at_least_one("trajectory.walks", t.walks)?;
        if t.steps < 2 {
            return Err(invalid("trajectory.steps must be at least 2"));
        }
        epsilon_ok("trajectory.epsilon", t.epsilon)?;
        if !(t.step_length.is_finite() && t.step_length >= 0.0) {
            return Err(invalid("trajectory.step_length must be non-negative"));
        }

        let d = &self.distribution;
        at_least_one("distribution.requests", d.requests)?;
        at_least_one("distribution.window", d.window)?;
        at_least_one("distribution.hotspots", d.hotspots)?;
        epsilon_ok("distribution.epsilon", d.epsilon)?;
        if !(0.0..=1.0).contains(&d.hotspot_share) {
            return Err(invalid("distribution.hotspot_share must lie in [0, 1]"));
        }
        Ok(())
    }
}

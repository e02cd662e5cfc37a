//! Scenario definitions and run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Codec;
use crate::draft::DraftCoefficients;
use crate::implement::OptimizerConfig;
use crate::tractor::TractorConfig;
use crate::track::TrackConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {what}: {msg}")]
    Parse { what: String, msg: String },
    #[error("invalid scenario {id}: {msg}")]
    Invalid { id: String, msg: String },
}

/// One implement with its operator speed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub implement: String,
    /// Effective working width for area accounting [m].
    pub w_eff: f64,
    /// km/h.
    pub v_min: f64,
    pub v_baseline: f64,
    pub v_max: f64,
    pub draft: DraftCoefficients,
}

const BUILTIN: [(&str, &str); 6] = [
    ("S1", include_str!("../data/scenarios/S1.toml")),
    ("S2", include_str!("../data/scenarios/S2.toml")),
    ("S3", include_str!("../data/scenarios/S3.toml")),
    ("S4", include_str!("../data/scenarios/S4.toml")),
    ("S5", include_str!("../data/scenarios/S5.toml")),
    ("S6", include_str!("../data/scenarios/S6.toml")),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { what: "scenario".into(), msg: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError::Invalid { id: self.id.clone(), msg };
        self.draft.validate().map_err(err)?;
        if !(self.w_eff > 0.0) {
            return Err(err("w_eff must be positive".into()));
        }
        if !(self.v_min > 0.0 && self.v_min < self.v_max && (self.v_min..=self.v_max).contains(&self.v_baseline)) {
            return Err(err("speeds must satisfy 0 < v_min <= v_baseline <= v_max".into()));
        }
        Ok(())
    }

    pub fn builtin(id: &str) -> Result<Self, ConfigError> {
        BUILTIN
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(id))
            .map(|(_, text)| Self::from_toml(text))
            .unwrap_or_else(|| Err(ConfigError::UnknownScenario(id.to_string())))
    }

    pub fn all_builtin() -> Vec<Self> {
        BUILTIN.iter().map(|(_, t)| Self::from_toml(t).expect("bundled scenario parses")).collect()
    }

    /// A built-in id such as `S3`, or a path to a scenario TOML file.
    pub fn resolve(name: &str) -> Result<Self, ConfigError> {
        let path = Path::new(name);
        if path.extension().is_some() || path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Io { path: name.to_string(), source })?;
            return Self::from_toml(&text);
        }
        Self::builtin(name)
    }

    /// Same geometry without any draft, for sanity runs.
    pub fn phantom(&self) -> Self {
        let mut s = self.clone();
        s.id = format!("{}-phantom", self.id);
        s.draft.a = 0.0;
        s.draft.b = 0.0;
        s.draft.c = 0.0;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// s.
    pub dt: f64,
    /// Lower heating value [kJ/g].
    pub lhv: f64,
    /// g/L.
    pub fuel_density: f64,
    /// Largest accepted energy-balance residual, fraction of fuel energy.
    pub closure_tol: f64,
    /// Simulated-time cap [s].
    pub t_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.1, lhv: 42.6, fuel_density: 840.0, closure_tol: 0.005, t_max: 7200.0 }
    }
}

/// Everything except the scenario needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub tractor: TractorConfig,
    /// Speed bounds are taken from the scenario.
    pub optimizer: OptimizerConfig,
    pub codec: Codec,
    pub track: TrackConfig,
    pub sim: SimConfig,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tractor: TractorConfig::default(),
            optimizer: OptimizerConfig::default(),
            codec: Codec::default(),
            track: TrackConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { what: "run config".into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn optimizer_for(&self, s: &Scenario) -> OptimizerConfig {
        OptimizerConfig { v_min: s.v_min, v_max: s.v_max, ..self.optimizer }
    }
}

//! Session configuration file (TOML). Every key is optional; unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plugin::BudgetPolicy;
use crate::robot::RobotParams;
use crate::vision::VisionConfig;
use crate::world::Shape;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabConfig {
    /// Overrides the per-user seed.
    pub seed: Option<u64>,
    pub physics_period_ms: u64,
    pub tick_period_ms: u64,
    /// Initial occupancy probability of every map cell.
    pub prior: f64,
    /// Replaces the generated hidden world.
    pub shapes: Option<Vec<Shape>>,
    pub robot: RobotParams,
    pub vision: VisionConfig,
    pub plugin: BudgetPolicy,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            seed: None,
            physics_period_ms: 10,
            tick_period_ms: 200,
            prior: 0.5,
            shapes: None,
            robot: RobotParams::default(),
            vision: VisionConfig::default(),
            plugin: BudgetPolicy::default(),
        }
    }
}

impl LabConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.physics_period_ms == 0 || self.tick_period_ms == 0 || self.vision.frame_period_ms == 0 {
            return bad("periods must be positive".into());
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return bad(format!("prior {} outside (0, 1)", self.prior));
        }
        if self.plugin.deadline_ms == 0 || self.plugin.overrun_limit == 0 {
            return bad("plugin deadline and overrun limit must be positive".into());
        }
        self.robot.validate().map_err(ConfigError::Invalid)?;
        self.vision.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

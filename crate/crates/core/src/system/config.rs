use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterConfig;
use crate::noc::Topology;

/// Whole-machine configuration. Unknown keys are rejected when read from JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub rows: usize,
    pub cols: usize,
    pub cluster: ClusterConfig,
    /// PE pipeline depth, 2 or 3.
    pub stages: u8,
    pub has_mul: bool,
    pub fclk_hz: f64,
    /// Watchdog: `run` gives up after this many cycles.
    pub max_cycles: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            rows: 10,
            cols: 5,
            cluster: ClusterConfig::default(),
            stages: 2,
            has_mul: false,
            fclk_hz: 250e6,
            max_cycles: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config: {0}")]
pub struct InvalidConfig(pub String);

impl SystemConfig {
    pub fn single_cluster() -> SystemConfig {
        SystemConfig {
            rows: 1,
            cols: 1,
            ..SystemConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        Topology::new(self.rows, self.cols).map_err(|e| InvalidConfig(e.to_string()))?;
        self.cluster.validate().map_err(|e| InvalidConfig(e.0))?;
        if self.stages != 2 && self.stages != 3 {
            return Err(InvalidConfig(format!(
                "stages must be 2 or 3 (got {})",
                self.stages
            )));
        }
        if !(self.fclk_hz.is_finite() && self.fclk_hz > 0.0) {
            return Err(InvalidConfig(format!(
                "fclk_hz must be positive (got {})",
                self.fclk_hz
            )));
        }
        if self.max_cycles == 0 {
            return Err(InvalidConfig("max_cycles must be positive".into()));
        }
        Ok(())
    }

    pub fn n_clusters(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_pes(&self) -> usize {
        self.n_clusters() * self.cluster.n_pes
    }

    pub fn from_json(text: &str) -> Result<SystemConfig, InvalidConfig> {
        let cfg: SystemConfig =
            serde_json::from_str(text).map_err(|e| InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

//! Experiment configuration file. Every key is optional; missing keys take
//! the defaults below, and the resolved values are what manifests record.

use std::path::Path;

use firesale::balance::SystemJson;
use firesale::network::NetworkJson;
use firesale::{ExperimentConfig, ShockKind, ShockSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShockConfig {
    pub kind: ShockKind,
    pub magnitude: f64,
    /// Shocked asset or bank; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

impl Default for ShockConfig {
    fn default() -> Self {
        Self {
            kind: ShockKind::Asset,
            magnitude: firesale::DEFAULT_ASSET_SHOCK,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_banks: usize,
    pub n_assets: usize,
    pub mean_bank_degree: f64,
    pub leverage: f64,
    pub alpha: f64,
    pub shock: ShockConfig,
    pub runs: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Explicit network for `cascade`; balance sheets are then uniform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkJson>,
    /// Explicit balance sheets and prices for `cascade`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemJson>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            n_banks: e.n_banks,
            n_assets: e.n_assets,
            mean_bank_degree: e.mean_bank_degree,
            leverage: e.leverage,
            alpha: e.alpha,
            shock: ShockConfig::default(),
            runs: e.runs,
            threshold: e.global_threshold,
            seed: e.base_seed,
            network: None,
            system: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        if cfg.network.is_some() && cfg.system.is_some() {
            return Err(CliError::Usage(
                "config may give `network` or `system`, not both".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            n_banks: self.n_banks,
            n_assets: self.n_assets,
            mean_bank_degree: self.mean_bank_degree,
            leverage: self.leverage,
            alpha: self.alpha,
            shock: ShockSpec {
                kind: self.shock.kind,
                magnitude: self.shock.magnitude,
            },
            runs: self.runs,
            global_threshold: self.threshold,
            base_seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

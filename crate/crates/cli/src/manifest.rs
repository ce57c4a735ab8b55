//! Run manifests: everything needed to regenerate an output file.

use std::path::{Path, PathBuf};

use firesale::SweepAxis;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::phase::PhaseGrid;
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Cascade {
        config: RunConfig,
    },
    Sweep {
        config: RunConfig,
        axis: SweepAxis,
        values: Vec<f64>,
    },
    Phase {
        grid: PhaseGrid,
    },
}

impl Invocation {
    pub fn seed(&self) -> u64 {
        match self {
            Invocation::Cascade { config } | Invocation::Sweep { config, .. } => config.seed,
            Invocation::Phase { grid } => grid.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputRecord {
    pub fn new(path: &Path, content: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            bytes: content.len() as u64,
            sha256: digest(content),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    /// Base seed; per-run seeds derive from it deterministically.
    pub seed: u64,
    /// Worker threads used. Outputs do not depend on it.
    pub threads: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputRecord>,
}

pub fn digest(content: &[u8]) -> String {
    format!("{:x}", Sha256::digest(content))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `out.csv` -> `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        crate::write_file(path, text.as_bytes())
    }
}

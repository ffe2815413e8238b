//! Run manifests: everything needed to rerun a command and get the same output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use sigpat_core::significance::PValueMethod;
use sigpat_core::synthetic::{Algorithm, GaussianConfig};
use sigpat_core::{MinerSpec, RandomizerSpec, StatisticKind, TransactionFormat};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl InputFile {
    pub fn hash(path: &Path) -> Result<Self, CliError> {
        let data = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<TransactionFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub randomizer: Option<RandomizerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miner: Option<MinerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<PValueMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<GaussianConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    /// Seconds since the Unix epoch.
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &'static str, seed: u64) -> Self {
        let t = now();
        Self {
            tool: "sigpat",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            inputs: Vec::new(),
            format: None,
            randomizer: None,
            effective_attempts: None,
            miner: None,
            statistic: None,
            n: None,
            alpha: None,
            method: None,
            algorithm: None,
            synthetic: None,
            runs: None,
            started_unix: t,
            finished_unix: t,
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished_unix = now();
        self
    }
}

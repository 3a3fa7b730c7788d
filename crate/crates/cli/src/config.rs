//! Run configuration: one TOML document describing an end-to-end run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swapattn::analysis::SweepSpec;
use swapattn::classifier::TrainConfig;
use swapattn::hamiltonian::DatasetConfig;
use swapattn::report::sha256_hex;
use swapattn::{Error, Result};

/// Where ground-state vectors live between commands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CachePolicy {
    /// Shards up to 11 sites, regeneration above.
    #[default]
    Auto,
    Shards,
    None,
}

pub const SHARD_MAX_SITES: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracySettings {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for AccuracySettings {
    fn default() -> Self {
        Self {
            sizes: vec![10, 20, 30, 50, 100],
            repeats: 10,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionSettings {
    /// Finite-shot estimate per pair; exact probabilities when absent.
    pub shots: Option<u64>,
    /// Run the ancilla circuit even without shots.
    pub circuit: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub cache: CachePolicy,
    pub train: TrainConfig,
    /// Number of grid points drawn for `train`.
    pub train_size: usize,
    pub sweep: SweepSpec,
    pub accuracy: AccuracySettings,
    pub attention: AttentionSettings,
    /// Output directory. Not part of the digest.
    pub out: PathBuf,
    /// Worker threads. Not part of the digest.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            cache: CachePolicy::Auto,
            train: TrainConfig::default(),
            train_size: 20,
            sweep: SweepSpec::default(),
            accuracy: AccuracySettings::default(),
            attention: AttentionSettings::default(),
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.grid.validate()?;
        self.dataset.thresholds.validate()?;
        self.train.validate()?;
        self.sweep.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding `out` and `jobs`.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
            map.remove("jobs");
        }
        sha256_hex(v.to_string().as_bytes())
    }

    /// Dataset settings with the state-retention flag resolved from the
    /// cache policy.
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            keep_states: self.uses_shards(),
            ..self.dataset
        }
    }

    pub fn uses_shards(&self) -> bool {
        match self.cache {
            CachePolicy::Auto => self.dataset.n_sites <= SHARD_MAX_SITES,
            CachePolicy::Shards => true,
            CachePolicy::None => false,
        }
    }
}

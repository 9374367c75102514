//! Experiment configuration files.

use crate::CliError;
use serde::Deserialize;
use setclr_core::harness::{gen_two_view_dataset, SyntheticSpec, TrainConfig, TwoViewDataset};
use setclr_core::LossConfig;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// One named objective to train.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossVariant {
    pub name: String,
    #[serde(default)]
    pub loss: LossConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Report directory, overridden by `--out`.
    pub output: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub data: SyntheticSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub losses: Vec<LossVariant>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: list must not be empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(CliError::Config(format!("seeds: duplicate seed {dup}")));
        }
        if self.losses.is_empty() {
            return Err(CliError::Config("losses: at least one [[losses]] entry is required".into()));
        }
        let mut names = HashSet::new();
        for v in &self.losses {
            if v.name.is_empty() || v.name.contains([',', '"', '\n']) {
                return Err(CliError::Config(format!("losses.name: invalid name {:?}", v.name)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(CliError::Config(format!("losses.name: duplicate name {:?}", v.name)));
            }
            self.train_config(&v.loss, self.seeds[0])
                .validate()
                .map_err(|e| CliError::Config(format!("losses[{}]: {e}", v.name)))?;
        }
        self.data.validate().map_err(|e| CliError::Config(format!("data: {e}")))?;
        Ok(())
    }

    /// Training settings for one loss and run seed.
    pub fn train_config(&self, loss: &LossConfig, seed: u64) -> TrainConfig {
        TrainConfig { loss: loss.clone(), seed, ..self.train.clone() }
    }

    pub fn dataset(&self) -> Result<TwoViewDataset, CliError> {
        gen_two_view_dataset(&self.data).map_err(|e| CliError::Config(format!("data: {e}")))
    }
}

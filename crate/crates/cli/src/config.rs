//! Command configuration: a JSON document, patched by `--set key=value`
//! overrides, then deserialized into the command's typed config.

use std::fs;
use std::path::{Path, PathBuf};

use lmn_core::data::{load_dataset, make_synthetic, Splits, SyntheticKind, SyntheticSizes};
use lmn_core::model::{Activation, ModelKind};
use lmn_core::pretrain::PretrainConfig;
use lmn_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Reads the config file (or starts from `{}`) and applies overrides.
pub fn load_raw(path: Option<&Path>, overrides: &[String]) -> Result<Value, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !value.is_object() {
        return Err(CliError::Config("config must be a JSON object".into()));
    }
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    Ok(value)
}

/// `a.b.c=value`; the value is parsed as JSON and taken as a string when
/// that fails.
pub fn apply_override(root: &mut Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{item}' is not of the form key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' has an empty segment")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{part}' is inside a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override '{key}' targets a non-object")))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

pub fn parse<T: DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub task: SyntheticKind,
    #[serde(default)]
    pub sizes: SyntheticSizes,
    #[serde(default)]
    pub seed: u64,
}

/// Exactly one of a dataset file or a synthetic task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

impl DataConfig {
    pub fn load(&self) -> Result<Splits, CliError> {
        match (&self.path, &self.synthetic) {
            (Some(path), None) => {
                let ds = load_dataset(path).map_err(|e| CliError::Config(format!("dataset {}: {e}", path.display())))?;
                ds.to_splits().map_err(CliError::from)
            }
            (None, Some(spec)) => make_synthetic(spec.task, spec.sizes, spec.seed).map_err(CliError::from),
            _ => Err(CliError::Config("set exactly one of data.path or data.synthetic".into())),
        }
    }
}

fn default_hidden_grid() -> Vec<usize> {
    vec![50, 100, 250, 500, 750]
}

fn default_lmn_pairs() -> Vec<(usize, usize)> {
    vec![(50, 50), (50, 100), (100, 100), (100, 250), (250, 250), (250, 500)]
}

fn default_l2_grid() -> Vec<f64> {
    vec![1e-4, 1e-5, 1e-6, 1e-7, 0.0]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitAeConfig {
    pub data: DataConfig,
    /// Fit on this unfolded network's hidden states instead of the inputs.
    pub unfolded_checkpoint: Option<PathBuf>,
    /// Memory sizes to evaluate; empty means every size up to the rank.
    pub memory_sizes: Vec<usize>,
    pub seed: u64,
}

/// Model sizes: `hidden` functional units, `memory` units for LMNs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    pub memory: usize,
    /// Unroll length of the unfolded network.
    pub k: usize,
    /// Hidden activation of the unfolded network.
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::LmnB,
            hidden: 100,
            memory: 100,
            k: 10,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Seeds weight initialization and, through `--seed`, shuffling.
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainCmdConfig {
    pub data: DataConfig,
    pub pretrain: PretrainConfig,
    /// Fine-tune the pretrained LMN with these settings.
    pub fine_tune: Option<TrainConfig>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub data: DataConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub data: DataConfig,
    pub kind: ModelKind,
    /// Hidden sizes for RNN and unfolded models.
    pub hidden_grid: Vec<usize>,
    /// `(functional, memory)` pairs for LMNs.
    pub lmn_pairs: Vec<(usize, usize)>,
    pub l2_grid: Vec<f64>,
    pub k: usize,
    pub activation: Activation,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            kind: ModelKind::LmnB,
            hidden_grid: default_hidden_grid(),
            lmn_pairs: default_lmn_pairs(),
            l2_grid: default_l2_grid(),
            k: 10,
            activation: Activation::Tanh,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

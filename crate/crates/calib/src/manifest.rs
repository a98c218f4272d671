//! Run manifests: the fully resolved configuration written as `run.json`
//! beside every output, sufficient to reproduce the run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use calib_core::{SplitSpec, TrainConfig, EVAL_BINS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::PredictionFormat;

pub const MANIFEST_FILE: &str = "run.json";
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Arguments of the synthetic blob generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub overlap: f64,
    pub seed: u64,
}

impl Default for DataArgs {
    fn default() -> Self {
        DataArgs {
            classes: 4,
            per_class: 500,
            dim: 8,
            overlap: 1.5,
            seed: 0,
        }
    }
}

/// Where the ECE weight came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GammaSource {
    Explicit {
        value: f64,
    },
    /// Balanced against the losses of one NLL-only warm-up epoch.
    Auto {
        nll: f64,
        soft_ece: f64,
        value: f64,
    },
}

impl GammaSource {
    pub fn value(&self) -> f64 {
        match *self {
            GammaSource::Explicit { value } | GammaSource::Auto { value, .. } => value,
        }
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub data: DataArgs,
    pub split: SplitSpec,
    /// `train.loss.gamma_e` always equals `gamma.value()`.
    pub train: TrainConfig,
    pub gamma: GammaSource,
    pub eval_bins: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let train = TrainConfig::default();
        TrainSpec {
            data: DataArgs::default(),
            split: SplitSpec::default(),
            gamma: GammaSource::Explicit {
                value: train.loss.gamma_e,
            },
            train,
            eval_bins: EVAL_BINS,
        }
    }
}

/// Offline evaluation of a prediction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub predictions: PathBuf,
    pub format: PredictionFormat,
    pub bins: usize,
    pub diagram: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunKind {
    Train(TrainSpec),
    Eval(EvalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub run: RunKind,
}

impl RunManifest {
    pub fn new(seed: u64, run: RunKind) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed,
            run,
        }
    }

    pub fn to_json(&self) -> String {
        // Plain data with string keys always serializes.
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

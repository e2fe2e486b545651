//! TOML experiment description.
//!
//! ```toml
//! output = "runs/mnist"
//! seeds = [1, 2, 3]
//! params_file = "params/presets.csv"   # optional, adds its labels as neuron names
//!
//! [task.mnist]
//! hidden = 100
//! epochs = 5
//! neurons = ["LIF", "FS", "SDS"]
//! # batch_size = 100, lr_w = 1e-3, lr_d = 1e-3, lr_decay = 0.9,
//! # v_window = 0.25, horizon = 20, resample = true, chunk_size = 25,
//! # train_limit, test_limit, record_time = false
//!
//! [task.mnist.data]
//! kind = "idx"
//! train_images = "data/mnist/train-images-idx3-ubyte"
//! train_labels = "data/mnist/train-labels-idx1-ubyte"
//! test_images = "data/mnist/t10k-images-idx3-ubyte"
//! test_labels = "data/mnist/t10k-labels-idx1-ubyte"
//!
//! [task.temporal.data]
//! kind = "synthetic"          # or kind = "encoded" with train / test paths
//! train_per_class = 100
//! test_per_class = 50
//!
//! [meta]                      # optional, used by the meta pipeline
//! source = "mnist"
//! epochs = 1
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::datasets::SyntheticTemporalConfig;
use crate::dynamics::DynamicParams;
use crate::error::{Error, Result};
use crate::meta::{read_params_file, ParamsRecord};
use crate::training::{TrainConfig, DEFAULT_LR_DECAY, DEFAULT_V_WINDOW};

pub const DEFAULT_HORIZON: usize = 20;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub task: BTreeMap<String, TaskConfig>,
    #[serde(default)]
    pub meta: Option<MetaConfig>,
    /// SHA-256 of the config text.
    #[serde(skip)]
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub data: DataConfig,
    pub hidden: usize,
    pub epochs: usize,
    pub neurons: Vec<String>,
    /// Rate-coding window for image data.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr_w: f64,
    #[serde(default = "default_lr")]
    pub lr_d: f64,
    #[serde(default = "default_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_window")]
    pub v_window: f64,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    /// Draw fresh rate-coded spikes every epoch.
    #[serde(default = "default_true")]
    pub resample: bool,
    #[serde(default)]
    pub record_time: bool,
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default)]
    pub test_limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Encoded {
        train: PathBuf,
        test: PathBuf,
    },
    Synthetic {
        #[serde(default = "syn_classes")]
        classes: usize,
        #[serde(default = "syn_size")]
        channels: usize,
        #[serde(default = "syn_size")]
        horizon: usize,
        #[serde(default = "syn_segments")]
        segments: usize,
        #[serde(default = "syn_budget")]
        budget: usize,
        #[serde(default = "syn_margin")]
        margin: usize,
        train_per_class: usize,
        test_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    /// Task whose data the dynamics are learned on.
    pub source: String,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default)]
    pub lr_d: Option<f64>,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_min_change")]
    pub min_change: f64,
    #[serde(default = "default_similarity")]
    pub similarity: f64,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_batch() -> usize {
    100
}
fn default_lr() -> f64 {
    1e-3
}
fn default_decay() -> f64 {
    DEFAULT_LR_DECAY
}
fn default_window() -> f64 {
    DEFAULT_V_WINDOW
}
fn default_chunk() -> usize {
    25
}
fn default_true() -> bool {
    true
}
fn syn_classes() -> usize {
    SyntheticTemporalConfig::default().classes
}
fn syn_size() -> usize {
    SyntheticTemporalConfig::default().channels
}
fn syn_segments() -> usize {
    SyntheticTemporalConfig::default().segments
}
fn syn_budget() -> usize {
    SyntheticTemporalConfig::default().budget
}
fn syn_margin() -> usize {
    SyntheticTemporalConfig::default().margin
}
fn default_contrast() -> f64 {
    0.5
}
fn default_min_change() -> f64 {
    0.05
}
fn default_similarity() -> f64 {
    0.95
}

impl TaskConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr_w: self.lr_w,
            lr_d: self.lr_d,
            lr_decay: self.lr_decay,
            v_window: self.v_window,
            chunk_size: self.chunk_size,
            record_time: self.record_time,
        }
    }
}

impl DataConfig {
    /// Synthetic generator settings for the train and test splits.
    pub fn synthetic(&self) -> Option<(SyntheticTemporalConfig, SyntheticTemporalConfig, u64)> {
        match *self {
            DataConfig::Synthetic {
                classes,
                channels,
                horizon,
                segments,
                budget,
                margin,
                train_per_class,
                test_per_class,
                seed,
            } => {
                let base = SyntheticTemporalConfig {
                    classes,
                    channels,
                    horizon,
                    samples_per_class: train_per_class,
                    segments,
                    budget,
                    margin,
                };
                let test = SyntheticTemporalConfig {
                    samples_per_class: test_per_class,
                    ..base.clone()
                };
                Some((base, test, seed))
            }
            _ => None,
        }
    }

    fn paths(&self) -> Vec<&PathBuf> {
        match self {
            DataConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => vec![train_images, train_labels, test_images, test_labels],
            DataConfig::Encoded { train, test } => vec![train, test],
            DataConfig::Synthetic { .. } => vec![],
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            DataConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => vec![train_images, train_labels, test_images, test_labels],
            DataConfig::Encoded { train, test } => vec![train, test],
            DataConfig::Synthetic { .. } => vec![],
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.hash = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        rebase(base, &mut cfg.output);
        if let Some(p) = &mut cfg.params_file {
            rebase(base, p);
        }
        for task in cfg.task.values_mut() {
            for p in task.data.paths_mut() {
                rebase(base, p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    pub fn params_records(&self) -> Result<Vec<ParamsRecord>> {
        match &self.params_file {
            Some(p) => read_params_file(p),
            None => Ok(Vec::new()),
        }
    }

    /// Checks everything that can be checked without training.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let records = self.params_records()?;
        for (name, task) in &self.task {
            let ctx = |e: Error| e.context(format!("task `{name}`"));
            for p in task.data.paths() {
                if !p.exists() {
                    return Err(ctx(Error::MissingFile(p.clone())));
                }
            }
            if let Some((train, test, _)) = task.data.synthetic() {
                train.validate().map_err(ctx)?;
                test.validate().map_err(ctx)?;
            }
            if task.neurons.is_empty() {
                return Err(ctx(Error::Config("no neuron types listed".into())));
            }
            for n in &task.neurons {
                resolve_neuron(n, &records).map_err(ctx)?;
            }
            if task.hidden == 0 || task.horizon == 0 || task.epochs == 0 {
                return Err(ctx(Error::Config("hidden, horizon and epochs must be positive".into())));
            }
            task.train_config().validate().map_err(ctx)?;
        }
        if let Some(m) = &self.meta {
            if !self.task.contains_key(&m.source) {
                return Err(Error::Config(format!("meta source task `{}` is not defined", m.source)));
            }
        }
        Ok(())
    }
}

/// Looks a neuron name up in the params file first, then among the
/// built-in presets.
pub fn resolve_neuron(name: &str, records: &[ParamsRecord]) -> Result<DynamicParams> {
    if let Some(r) = records.iter().find(|r| r.label == name) {
        return r.params();
    }
    DynamicParams::preset(name).ok_or_else(|| Error::Config(format!("unknown neuron type `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
output = "out"
seeds = [1, 2]

[task.temporal]
hidden = 20
epochs = 2
neurons = ["LIF", "SDS"]

[task.temporal.data]
kind = "synthetic"
train_per_class = 10
test_per_class = 5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::parse(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(cfg.output, PathBuf::from("/base/out"));
        let t = &cfg.task["temporal"];
        assert_eq!((t.batch_size, t.horizon, t.lr_w), (100, 20, 1e-3));
        let (train, test, seed) = t.data.synthetic().unwrap();
        assert_eq!((train.classes, train.channels, train.horizon, seed), (4, 30, 30, 0));
        assert_eq!(test.samples_per_class, 5);
        assert_eq!(cfg.hash.len(), 64);
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_catches_problems_before_training() {
        let missing = SAMPLE.replace(
            "kind = \"synthetic\"\ntrain_per_class = 10\ntest_per_class = 5",
            "kind = \"encoded\"\ntrain = \"nope.spk\"\ntest = \"nope.spk\"",
        );
        let cfg = ExperimentConfig::parse(&missing, Path::new("/nonexistent")).unwrap();
        assert!(cfg.validate().is_err());

        let cfg = ExperimentConfig::parse(&SAMPLE.replace("[1, 2]", "[]"), Path::new(".")).unwrap();
        assert!(cfg.validate().is_err());

        let cfg = ExperimentConfig::parse(&SAMPLE.replace("\"SDS\"", "\"XYZ\""), Path::new(".")).unwrap();
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::parse(&SAMPLE.replace("epochs", "epoch"), Path::new(".")).is_err());
    }
}

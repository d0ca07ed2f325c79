//! Experiment configuration.
//!
//! Configs are TOML files whose leaves are addressed by dotted keys such as
//! `layer.size` or `model.variant`. Any key may also be given on the command
//! line as `key=value`, and keys under `grid.` name the axes of a search:
//!
//! ```toml
//! model.variant = "hetero_shallow"
//! model.delays = [1, 3, 5]
//! layer.size = 1000
//! grid.layer.rho = [0.2, 0.3, 0.4]
//! ```

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::dsp::features::{default_center, FeatureConfig};
use crate::error::{Error, Result};
use crate::readout::DEFAULT_GAMMA;
use crate::reservoir::{LayerConfig, StateTap, SubGroupPartition, Variant};
use crate::rng;

/// Bias half-width used by deep variants when none is configured.
pub const DEEP_BIAS_SCALE: f64 = 0.1;
/// Delays used by heterogeneous variants when none are configured.
pub const DEFAULT_DELAYS: [usize; 3] = [1, 3, 5];

/// Where the data lives and how speakers are split.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    /// Number of training speakers (validation is carved from these).
    /// `None` keeps the split column of the manifest.
    pub train_speakers: Option<usize>,
    pub test_speakers: Option<usize>,
    pub val_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { manifest: None, train_speakers: None, test_speakers: None, val_fraction: 0.2, split_seed: 0 }
    }
}

/// One named axis of a grid search. Values are applied with
/// [`ExperimentConfig::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Depth for deep variants; must be 1 otherwise.
    pub n_layers: usize,
    /// Template shared by every layer. The seed is replaced per trial.
    pub layer: LayerConfig,
    /// `None` means 0 for shallow variants and 0.1 for deep ones.
    pub bias_scale: Option<f64>,
    /// Sub-group delays (hetero_shallow) or per-layer delays (hetero_deep).
    pub delays: Option<Vec<usize>>,
    /// Sub-group sizes; equal groups when absent.
    pub group_sizes: Option<Vec<usize>>,
    pub tap: StateTap,
    pub features: FeatureConfig,
    pub context_width: usize,
    /// `None` means `context_width / 2`.
    pub context_center: Option<usize>,
    pub washout: usize,
    pub gamma: f64,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub n_classes: usize,
    pub data: DataConfig,
    pub grid: Vec<GridAxis>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Shallow,
            n_layers: 1,
            layer: LayerConfig::default(),
            bias_scale: None,
            delays: None,
            group_sizes: None,
            tap: StateTap::default(),
            features: FeatureConfig::default(),
            context_width: 14,
            context_center: None,
            washout: 0,
            gamma: DEFAULT_GAMMA,
            n_seeds: 5,
            master_seed: 0,
            n_classes: 35,
            data: DataConfig::default(),
            grid: Vec::new(),
        }
    }
}

/// Flattens nested tables into `(dotted key, leaf value)` pairs.
fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            leaf => out.push((key, leaf.clone())),
        }
    }
}

/// Parses the right-hand side of `key=value`. Anything that is not a TOML
/// value is taken as a bare string, so `model.variant=deep` works.
pub fn parse_value(text: &str) -> Value {
    let text = text.trim();
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Renders a value for CSV cells and logs: strings unquoted, lists joined by `;`.
pub fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(display_value).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn bad(key: &str, v: &Value, what: &str) -> Error {
    Error::config(format!("{key}: expected {what}, got {v}"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, v, "a nonnegative integer")),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(bad(key, v, "a nonnegative integer")),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, v, "a number")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, v, "true or false"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, v, "a string"))
}

fn as_usize_list(key: &str, v: &Value) -> Result<Vec<usize>> {
    match v {
        Value::Array(items) => items.iter().map(|i| as_usize(key, i)).collect(),
        _ => Err(bad(key, v, "a list of nonnegative integers")),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::config(format!("config: {e}")))?;
        let mut leaves = Vec::new();
        flatten("", &table, &mut leaves);
        let mut cfg = Self::default();
        for (key, value) in leaves {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), &parse_value(value))
    }

    /// Sets one dotted key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        if let Some(axis) = key.strip_prefix("grid.") {
            let values = match v {
                Value::Array(items) if !items.is_empty() => items.clone(),
                _ => return Err(bad(key, v, "a non-empty list")),
            };
            // Validate each value against a scratch config.
            let mut probe = self.clone();
            for item in &values {
                probe.set(axis, item)?;
            }
            self.grid.retain(|a| a.key != axis);
            self.grid.push(GridAxis { key: axis.to_string(), values });
            return Ok(());
        }
        match key {
            "model.variant" => self.variant = as_str(key, v)?.parse()?,
            "model.layers" => self.n_layers = as_usize(key, v)?,
            "model.delays" => self.delays = Some(as_usize_list(key, v)?),
            "model.group_sizes" => self.group_sizes = Some(as_usize_list(key, v)?),
            "model.tap" => {
                self.tap = match as_str(key, v)? {
                    "delayed" => StateTap::Delayed,
                    "current" => StateTap::Current,
                    other => return Err(Error::config(format!("{key}: unknown tap {other:?}"))),
                }
            }
            "layer.size" => self.layer.size = as_usize(key, v)?,
            "layer.rho" => self.layer.spectral_radius = as_f64(key, v)?,
            "layer.leak" => self.layer.leak_rate = as_f64(key, v)?,
            "layer.input_scale" => self.layer.input_scale = as_f64(key, v)?,
            "layer.bias_scale" => self.bias_scale = Some(as_f64(key, v)?),
            "layer.connectivity" => self.layer.connectivity = as_f64(key, v)?,
            "layer.leak_on_activation" => self.layer.leak_on_activation = as_bool(key, v)?,
            "features.frame_ms" => self.features.frame.frame_ms = as_f64(key, v)?,
            "features.overlap_ms" => self.features.frame.overlap_ms = as_f64(key, v)?,
            "features.fft_size" => self.features.frame.fft_size = Some(as_usize(key, v)?),
            "features.n_filters" => self.features.n_filters = as_usize(key, v)?,
            "features.log_floor" => self.features.log_floor = as_f64(key, v)?,
            "features.normalize" => self.features.normalize = as_bool(key, v)?,
            "features.context_width" => self.context_width = as_usize(key, v)?,
            "features.context_center" => self.context_center = Some(as_usize(key, v)?),
            "train.washout" => self.washout = as_usize(key, v)?,
            "ridge.gamma" => self.gamma = as_f64(key, v)?,
            "trials.n_seeds" => self.n_seeds = as_usize(key, v)?,
            "trials.master_seed" => self.master_seed = as_u64(key, v)?,
            "data.n_classes" => self.n_classes = as_usize(key, v)?,
            "data.manifest" => self.data.manifest = Some(PathBuf::from(as_str(key, v)?)),
            "data.train_speakers" => self.data.train_speakers = Some(as_usize(key, v)?),
            "data.test_speakers" => self.data.test_speakers = Some(as_usize(key, v)?),
            "data.val_fraction" => self.data.val_fraction = as_f64(key, v)?,
            "data.split_seed" => self.data.split_seed = as_u64(key, v)?,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn center(&self) -> usize {
        self.context_center.unwrap_or_else(|| default_center(self.context_width))
    }

    pub fn resolved_bias_scale(&self) -> f64 {
        self.bias_scale.unwrap_or(if self.variant.is_deep() { DEEP_BIAS_SCALE } else { 0.0 })
    }

    /// Delays with variant defaults: `[1, 3, 5]` sub-groups for
    /// hetero_shallow, `1, 3, 5, ...` by layer for hetero_deep.
    pub fn resolved_delays(&self) -> Vec<usize> {
        match (&self.delays, self.variant) {
            (Some(d), _) => d.clone(),
            (None, Variant::HeteroShallow) => DEFAULT_DELAYS.to_vec(),
            (None, Variant::HeteroDeep) => (0..self.n_layers).map(|i| 2 * i + 1).collect(),
            (None, _) => Vec::new(),
        }
    }

    /// Feature dimension seen by the reservoir after context stacking.
    pub fn input_dim(&self) -> usize {
        self.features.n_filters * self.context_width
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::config("trials.n_seeds must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(Error::config("data.n_classes must be at least 2"));
        }
        if self.context_width == 0 || self.center() >= self.context_width {
            return Err(Error::config(format!(
                "context center {} outside width {}",
                self.center(),
                self.context_width
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::config(format!("ridge.gamma {} must be nonnegative", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.data.val_fraction) {
            return Err(Error::config(format!("data.val_fraction {} outside [0, 1)", self.data.val_fraction)));
        }
        self.features.frame.validate()?;
        if self.n_layers == 0 || (!self.variant.is_deep() && self.n_layers != 1) {
            return Err(Error::config(format!("{} takes model.layers = 1, got {}", self.variant, self.n_layers)));
        }
        let delays = self.resolved_delays();
        match self.variant {
            Variant::HeteroShallow => {
                self.partition()?;
            }
            Variant::HeteroDeep if delays.len() != self.n_layers => {
                return Err(Error::config(format!("{} layer delays for {} layers", delays.len(), self.n_layers)))
            }
            Variant::Shallow | Variant::Deep if self.delays.as_ref().is_some_and(|d| !d.is_empty()) => {
                return Err(Error::config(format!("{} takes no delays", self.variant)))
            }
            _ => {}
        }
        if self.group_sizes.is_some() && self.variant != Variant::HeteroShallow {
            return Err(Error::config("model.group_sizes only applies to hetero_shallow"));
        }
        self.layer_configs(0).into_iter().try_for_each(|l| l.validate())
    }

    /// Per-layer configs for one trial. Layer `i` draws from
    /// `derive(trial_seed, i)`.
    pub fn layer_configs(&self, trial_seed: u64) -> Vec<LayerConfig> {
        let bias = self.resolved_bias_scale();
        let delays = self.resolved_delays();
        (0..self.n_layers)
            .map(|i| LayerConfig {
                bias_scale: bias,
                seed: rng::derive(trial_seed, i as u64),
                delay: if self.variant == Variant::HeteroDeep { delays.get(i).copied().unwrap_or(0) } else { 0 },
                ..self.layer
            })
            .collect()
    }

    pub fn partition(&self) -> Result<Option<SubGroupPartition>> {
        if self.variant != Variant::HeteroShallow {
            return Ok(None);
        }
        let delays = self.resolved_delays();
        let p = match &self.group_sizes {
            Some(sizes) => SubGroupPartition::new(sizes.clone(), delays)?,
            None => SubGroupPartition::equal(self.layer.size, delays)?,
        };
        if p.total() != self.layer.size {
            return Err(Error::config(format!("group sizes sum to {}, layer.size is {}", p.total(), self.layer.size)));
        }
        Ok(Some(p))
    }

    /// Seed of trial `k`: `master_seed + k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        self.master_seed.wrapping_add(k as u64)
    }
}

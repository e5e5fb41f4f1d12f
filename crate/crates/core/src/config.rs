//! Encoder hyperparameters and their `key = value` text form.
//!
//! ```text
//! # comment
//! subdomain_size = 512
//! l0_net = 3x96
//! activation = sine
//! ```
//!
//! Unknown keys, duplicate keys and malformed values are errors.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::neural::{Activation, ActivationKind, NetShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("invalid value '{value}' for '{key}': {reason}")]
    Value { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub subdomain_size: i32,
    pub l1_net: NetShape,
    /// Used only for subdomains that contain active level-1 tiles.
    pub tile_net: NetShape,
    pub l0_net: NetShape,
    pub voxel_net: NetShape,
    pub activation: Activation,
    pub ffm_scale: f32,
    pub ffm_size: usize,
    pub lr: f64,
    /// Learning rate of refinement and warm-started passes.
    pub refine_lr: f64,
    pub decay: f64,
    pub decay_interval: u64,
    pub max_epochs: u64,
    pub sample_interval: u64,
    pub batch_size: usize,
    /// `None` picks a default from the grid class.
    pub significance: Option<f32>,
    pub strict_topology: bool,
    pub seed: u64,
    /// Stored weight precision, 32 or 16.
    pub weight_bits: u8,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            subdomain_size: 512,
            l1_net: NetShape { depth: 3, width: 48 },
            tile_net: NetShape { depth: 3, width: 48 },
            l0_net: NetShape { depth: 3, width: 96 },
            voxel_net: NetShape { depth: 3, width: 96 },
            activation: Activation::sine(3.0),
            ffm_scale: 5.0,
            ffm_size: 192,
            lr: 1e-3,
            refine_lr: 2e-4,
            decay: 0.975,
            decay_interval: 100,
            max_epochs: 2500,
            sample_interval: 1,
            batch_size: 1 << 16,
            significance: None,
            strict_topology: false,
            seed: 0,
            weight_bits: 32,
        }
    }
}

impl TrainConfig {
    /// Builds the l1 width as half the l0 width.
    pub fn with_l0_width(mut self, width: usize) -> Self {
        self.l0_net.width = width;
        self.voxel_net.width = width;
        self.l1_net.width = (width / 2).max(1);
        self.tile_net.width = (width / 2).max(1);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(ConfigError::Value { key: key.into(), value, reason: reason.into() })
        };
        if self.subdomain_size <= 0 || self.subdomain_size % 512 != 0 {
            return bad("subdomain_size", self.subdomain_size.to_string(), "must be a positive multiple of 512");
        }
        for (key, s) in [("l1_net", self.l1_net), ("tile_net", self.tile_net), ("l0_net", self.l0_net), ("voxel_net", self.voxel_net)] {
            if s.depth == 0 || s.width == 0 || s.width > u16::MAX as usize {
                return bad(key, format_shape(s), "depth and width must be positive and width below 65536");
            }
        }
        if !(self.activation.frequency.is_finite() && self.activation.frequency > 0.0) {
            return bad("frequency", self.activation.frequency.to_string(), "must be positive");
        }
        if !(self.ffm_scale.is_finite() && self.ffm_scale >= 0.0) {
            return bad("ffm_scale", self.ffm_scale.to_string(), "must be non-negative");
        }
        if self.ffm_size == 0 || 2 * self.ffm_size > u16::MAX as usize {
            return bad("ffm_size", self.ffm_size.to_string(), "must be in 1..32768");
        }
        for (key, v) in [("lr", self.lr), ("refine_lr", self.refine_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, v.to_string(), "must be positive");
            }
        }
        if !(self.decay.is_finite() && self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay", self.decay.to_string(), "must be in (0, 1]");
        }
        if self.decay_interval == 0 {
            return bad("decay_interval", "0".into(), "must be positive");
        }
        if self.sample_interval == 0 {
            return bad("sample_interval", "0".into(), "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "0".into(), "must be positive");
        }
        if let Some(s) = self.significance {
            if !(s.is_finite() && s >= 0.0) {
                return bad("significance", s.to_string(), "must be non-negative");
            }
        }
        if self.weight_bits != 32 && self.weight_bits != 16 {
            return bad("weight_bits", self.weight_bits.to_string(), "must be 16 or 32");
        }
        Ok(())
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let err = |reason: &str| ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() };
        fn num<T: FromStr>(v: &str, e: impl Fn(&str) -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| e("not a number"))
        }
        match key {
            "subdomain_size" => self.subdomain_size = num(value, err)?,
            "l1_net" => self.l1_net = parse_shape(value).ok_or_else(|| err("expected DEPTHxWIDTH"))?,
            "tile_net" => self.tile_net = parse_shape(value).ok_or_else(|| err("expected DEPTHxWIDTH"))?,
            "l0_net" => self.l0_net = parse_shape(value).ok_or_else(|| err("expected DEPTHxWIDTH"))?,
            "voxel_net" => self.voxel_net = parse_shape(value).ok_or_else(|| err("expected DEPTHxWIDTH"))?,
            "activation" => {
                self.activation.kind = match value {
                    "relu" => ActivationKind::Relu,
                    "tanh" => ActivationKind::Tanh,
                    "sine" => ActivationKind::Sine,
                    _ => return Err(err("expected relu, tanh or sine")),
                }
            }
            "frequency" => self.activation.frequency = num(value, err)?,
            "ffm_scale" => self.ffm_scale = num(value, err)?,
            "ffm_size" => self.ffm_size = num(value, err)?,
            "lr" => self.lr = num(value, err)?,
            "refine_lr" => self.refine_lr = num(value, err)?,
            "decay" => self.decay = num(value, err)?,
            "decay_interval" => self.decay_interval = num(value, err)?,
            "max_epochs" => self.max_epochs = num(value, err)?,
            "sample_interval" => self.sample_interval = num(value, err)?,
            "batch_size" => self.batch_size = num(value, err)?,
            "significance" => {
                self.significance = if value == "auto" { None } else { Some(num(value, err)?) }
            }
            "strict_topology" => self.strict_topology = num(value, err)?,
            "seed" => self.seed = num(value, err)?,
            "weight_bits" => self.weight_bits = num(value, err)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_shape(s: &str) -> Option<NetShape> {
    let (d, w) = s.split_once('x')?;
    Some(NetShape { depth: d.trim().parse().ok()?, width: w.trim().parse().ok()? })
}

fn format_shape(s: NetShape) -> String {
    format!("{}x{}", s.depth, s.width)
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let act = match self.activation.kind {
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sine => "sine",
        };
        writeln!(f, "subdomain_size = {}", self.subdomain_size)?;
        writeln!(f, "l1_net = {}", format_shape(self.l1_net))?;
        writeln!(f, "tile_net = {}", format_shape(self.tile_net))?;
        writeln!(f, "l0_net = {}", format_shape(self.l0_net))?;
        writeln!(f, "voxel_net = {}", format_shape(self.voxel_net))?;
        writeln!(f, "activation = {act}")?;
        writeln!(f, "frequency = {:?}", self.activation.frequency)?;
        writeln!(f, "ffm_scale = {:?}", self.ffm_scale)?;
        writeln!(f, "ffm_size = {}", self.ffm_size)?;
        writeln!(f, "lr = {:?}", self.lr)?;
        writeln!(f, "refine_lr = {:?}", self.refine_lr)?;
        writeln!(f, "decay = {:?}", self.decay)?;
        writeln!(f, "decay_interval = {}", self.decay_interval)?;
        writeln!(f, "max_epochs = {}", self.max_epochs)?;
        writeln!(f, "sample_interval = {}", self.sample_interval)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        match self.significance {
            None => writeln!(f, "significance = auto")?,
            Some(s) => writeln!(f, "significance = {s:?}")?,
        }
        writeln!(f, "strict_topology = {}", self.strict_topology)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "weight_bits = {}", self.weight_bits)
    }
}

//! Experiment configuration: one JSON document covering generation, model,
//! training, text encoding, and artifact paths, with strict validation and
//! dotted-path overrides (`train.epochs=20`).
//!
//! The defaults describe the standard benchmark: a 40-class source and a
//! 10-class disjoint target sharing one generative seed, an 8-frame model,
//! and the published training recipe.

use crate::protomodel::ModelConfig;
use crate::synthgen::SynthConfig;
use crate::textenc::TextEncoderSpec;
use crate::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown config key: {0}")]
    UnknownKey(String),
    #[error("config key {0} is not overridable (not an object along the path)")]
    NotAnObject(String),
    #[error("bad override (expected key=value): {0}")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Validation(String),
}

/// Source and target generation settings. Both sides must share the seed:
/// the generative link between descriptions and frames is keyed by it, and
/// zero-shot transfer is only meaningful within one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub source: SynthConfig,
    pub target: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        let source = SynthConfig {
            seed: 42,
            num_classes: 40,
            videos_per_class: 50,
            frames_per_video: 8,
            frame_dim: 32,
            embed_dim: 16,
            noise_sigma: 0.1,
            object_strength: 0.0,
            object_prob: 0.0,
        };
        let target = SynthConfig {
            num_classes: 10,
            videos_per_class: 20,
            ..source.clone()
        };
        SynthSection { source, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            data_dir: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

fn default_model() -> ModelConfig {
    ModelConfig {
        input_dim: 32,
        hidden_dim: 512,
        embed_dim: 16,
        frames: 8,
        temporal: crate::protomodel::TemporalMode::Mean,
        attn_layers: 1,
        normalize_features: false,
        temperature: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub text: TextEncoderSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthSection::default(),
            model: default_model(),
            train: TrainConfig::default(),
            paths: PathsSection::default(),
            text: TextEncoderSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Cross-section consistency on top of each section's own validation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let val = |msg: String| ConfigError::Validation(msg);
        self.synth
            .source
            .validate()
            .map_err(|e| val(format!("synth.source: {e}")))?;
        self.synth
            .target
            .validate()
            .map_err(|e| val(format!("synth.target: {e}")))?;
        self.model
            .validate()
            .map_err(|e| val(format!("model: {e}")))?;
        self.train
            .validate()
            .map_err(|e| val(format!("train: {e}")))?;

        if self.synth.source.seed != self.synth.target.seed {
            return Err(val(format!(
                "synth.source.seed {} != synth.target.seed {}: source and target must share \
                 one generative seed for zero-shot transfer to be meaningful",
                self.synth.source.seed, self.synth.target.seed
            )));
        }
        for (name, cfg) in [("source", &self.synth.source), ("target", &self.synth.target)] {
            if cfg.frame_dim != self.model.input_dim {
                return Err(val(format!(
                    "synth.{name}.frame_dim {} != model.input_dim {}",
                    cfg.frame_dim, self.model.input_dim
                )));
            }
            if cfg.embed_dim != self.model.embed_dim {
                return Err(val(format!(
                    "synth.{name}.embed_dim {} != model.embed_dim {}",
                    cfg.embed_dim, self.model.embed_dim
                )));
            }
            if cfg.embed_dim != self.text.embed_dim {
                return Err(val(format!(
                    "synth.{name}.embed_dim {} != text.embed_dim {}",
                    cfg.embed_dim, self.text.embed_dim
                )));
            }
        }
        Ok(())
    }
}

fn parse_override(raw: &str) -> Result<(Vec<String>, Value), ConfigError> {
    let (path, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(raw.to_string()))?;
    if path.is_empty() {
        return Err(ConfigError::BadOverride(raw.to_string()));
    }
    let keys: Vec<String> = path.split('.').map(str::to_string).collect();
    if keys.iter().any(String::is_empty) {
        return Err(ConfigError::BadOverride(raw.to_string()));
    }
    // Values parse as JSON when they can (numbers, bools, null) and fall
    // back to strings (enum variants like `attention`).
    let value = serde_json::from_str::<Value>(value.trim())
        .unwrap_or_else(|_| Value::String(value.trim().to_string()));
    Ok((keys, value))
}

fn apply_override(doc: &mut Value, keys: &[String], value: Value) -> Result<(), ConfigError> {
    let dotted = keys.join(".");
    let mut cursor = doc;
    for key in &keys[..keys.len() - 1] {
        cursor = match cursor {
            Value::Object(map) => map
                .get_mut(key)
                .ok_or_else(|| ConfigError::UnknownKey(dotted.clone()))?,
            _ => return Err(ConfigError::NotAnObject(dotted.clone())),
        };
    }
    match cursor {
        Value::Object(map) => {
            let leaf = keys.last().expect("keys nonempty");
            match map.get_mut(leaf) {
                Some(slot) => {
                    *slot = value;
                    Ok(())
                }
                None => Err(ConfigError::UnknownKey(dotted)),
            }
        }
        _ => Err(ConfigError::NotAnObject(dotted)),
    }
}

/// Apply dotted overrides to a config and re-validate. Override paths must
/// name existing keys: typos fail instead of silently creating new keys.
pub fn with_overrides(
    config: &ExperimentConfig,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut doc = serde_json::to_value(config)?;
    for raw in overrides {
        let (keys, value) = parse_override(raw)?;
        apply_override(&mut doc, &keys, value)?;
    }
    let config: ExperimentConfig = serde_json::from_value(doc)?;
    config.validate()?;
    Ok(config)
}

/// Parse a config file and apply overrides. The file may omit sections
/// (defaults fill in) but must not contain unknown keys.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    with_overrides(&config, overrides)
}

/// Load a config from an optional path: a given path must exist; with none,
/// the built-in defaults are used. Overrides apply either way.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    match path {
        Some(p) => parse_config(p, overrides),
        None => with_overrides(&ExperimentConfig::default(), overrides),
    }
}

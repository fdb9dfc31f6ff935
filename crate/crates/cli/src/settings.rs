//! Model and training settings from flags, an optional config file, and
//! library defaults, in that order of precedence.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use g3ad::model::CorrelationReduction;
use g3ad::{Ablations, Architecture, BackboneKind, Execution, G3adConfig, Readout, TrainOptions};
use serde::{Deserialize, Serialize};

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// TOML or JSON file with any of the settings below; flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Attribute versus topology reconstruction weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Consistency alignment weight.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Embedding size.
    #[arg(long)]
    pub dim: Option<usize>,
    /// gat, gcn, sage or gin.
    #[arg(long)]
    pub backbone: Option<BackboneKind>,
    /// mean, min, max or attention.
    #[arg(long)]
    pub readout: Option<Readout>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma list of disabled components: ar, tr, ca, cc.
    #[arg(long, value_name = "LIST")]
    pub ablate: Option<String>,
    /// full, shared or separated.
    #[arg(long)]
    pub arch: Option<Architecture>,
    /// Run every dense product on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

/// Everything a config file may set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileSettings {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub dim: Option<usize>,
    pub backbone: Option<BackboneKind>,
    pub readout: Option<Readout>,
    pub seed: Option<u64>,
    pub ablate: Option<String>,
    pub arch: Option<Architecture>,
    pub sequential: Option<bool>,
    pub cons_floor: Option<f64>,
    pub attention_self_loops: Option<bool>,
    pub correlation_reduction: Option<CorrelationReduction>,
}

impl FileSettings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let parsed = match ext {
            "json" => serde_json::from_str(&text).map_err(anyhow::Error::from),
            "toml" => toml::from_str(&text).map_err(anyhow::Error::from),
            _ => toml::from_str(&text)
                .map_err(anyhow::Error::from)
                .or_else(|_| serde_json::from_str(&text).map_err(anyhow::Error::from)),
        };
        parsed.with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub model: G3adConfig,
    pub train: TrainOptions,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => FileSettings::load(p)?,
            None => FileSettings::default(),
        };
        let defaults = G3adConfig::default();
        let train_defaults = TrainOptions {
            epochs: 100,
            ..TrainOptions::default()
        };
        let ablations = match self.ablate.as_deref().or(file.ablate.as_deref()) {
            Some(list) => Ablations::from_disabled(list)?,
            None => Ablations::default(),
        };
        let model = G3adConfig {
            embed_dim: self.dim.or(file.dim).unwrap_or(defaults.embed_dim),
            lambda1: self.lambda1.or(file.lambda1).unwrap_or(defaults.lambda1),
            lambda2: self.lambda2.or(file.lambda2).unwrap_or(defaults.lambda2),
            backbone: self.backbone.or(file.backbone).unwrap_or(defaults.backbone),
            readout: self.readout.or(file.readout).unwrap_or(defaults.readout),
            cons_floor: file.cons_floor.unwrap_or(defaults.cons_floor),
            ablations,
            arch: self.arch.or(file.arch).unwrap_or(defaults.arch),
            attention_self_loops: file.attention_self_loops.unwrap_or(defaults.attention_self_loops),
            correlation_reduction: file.correlation_reduction.unwrap_or(defaults.correlation_reduction),
        };
        model.validate()?;
        let sequential = self.sequential || file.sequential.unwrap_or(false);
        let train = TrainOptions {
            epochs: self.epochs.or(file.epochs).unwrap_or(train_defaults.epochs),
            learning_rate: self.lr.or(file.lr).unwrap_or(train_defaults.learning_rate),
            seed: self.seed.or(file.seed).unwrap_or(train_defaults.seed),
            exec: if sequential { Execution::Sequential } else { Execution::Parallel },
        };
        if train.epochs == 0 {
            bail!("--epochs must be at least 1");
        }
        if !(train.learning_rate > 0.0 && train.learning_rate.is_finite()) {
            bail!("--lr must be positive");
        }
        Ok(Settings { model, train })
    }
}

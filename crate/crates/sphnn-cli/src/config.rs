//! The run configuration file.
//!
//! One JSON document drives every experiment command:
//!
//! ```json
//! {
//!   "data": "data/fixture",
//!   "motifs": ["motifs/apa.json", "motifs/pvp.json"],
//!   "out": "runs/fixture",
//!   "max_instances": null,
//!   "sample_seed": 0,
//!   "model": { "lambda": 0.4 },
//!   "train": { "max_epochs": 300, "patience": 30, "label_rate": 0.4, "seed": 0 }
//! }
//! ```
//!
//! `data`, `motifs`, and `out` are resolved relative to the config file's
//! own directory. `model` holds overrides only: any field left out keeps
//! the built-in default, so `{}` is the default architecture. Unknown keys
//! anywhere are errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sphnn_core::model::{EdgeAccumulation, ModelConfig};
use sphnn_core::train::TrainConfig;

use crate::error::CliError;

/// Optional per-field overrides of the default architecture.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub d_hidden: Option<usize>,
    pub d_att: Option<usize>,
    pub d_fuse: Option<usize>,
    pub layers: Option<usize>,
    pub lambda: Option<f64>,
    pub leaky_slope: Option<f64>,
    pub edge_mode: Option<EdgeAccumulation>,
    pub use_attention: Option<bool>,
    pub train_lambda: Option<bool>,
    pub dropout: Option<f64>,
}

impl ModelOverrides {
    pub fn apply(&self, q: usize) -> ModelConfig {
        self.apply_onto(ModelConfig::new(q))
    }

    pub fn apply_onto(&self, mut cfg: ModelConfig) -> ModelConfig {
        if let Some(v) = self.d_hidden {
            cfg.d_hidden = v;
        }
        if let Some(v) = self.d_att {
            cfg.d_att = v;
        }
        if let Some(v) = self.d_fuse {
            cfg.d_fuse = v;
        }
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.leaky_slope {
            cfg.leaky_slope = v;
        }
        if let Some(v) = self.edge_mode {
            cfg.edge_mode = v;
        }
        if let Some(v) = self.use_attention {
            cfg.use_attention = v;
        }
        if let Some(v) = self.train_lambda {
            cfg.train_lambda = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory.
    pub data: PathBuf,
    /// Motif spec files, one hypergraph each.
    pub motifs: Vec<PathBuf>,
    /// Default output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Cap on instances kept per motif (uniform sample when exceeded).
    #[serde(default)]
    pub max_instances: Option<usize>,
    /// Seed for that sample.
    #[serde(default)]
    pub sample_seed: u64,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub train: TrainConfig,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if cfg.motifs.is_empty() {
        return Err(CliError::Config(format!(
            "{}: motifs list is empty",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.data = rebase(base, &cfg.data);
    cfg.motifs = cfg.motifs.iter().map(|m| rebase(base, m)).collect();
    cfg.out = cfg.out.as_ref().map(|o| rebase(base, o));
    Ok(cfg)
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

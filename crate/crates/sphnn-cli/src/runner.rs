//! Shared machinery behind the experiment commands: dataset loading,
//! hypergraph bundle construction, training, and split evaluation.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sphnn_core::hin::{load_graph, HeteroGraph, NodeId};
use sphnn_core::hypergraph::{build_hypergraph, Hypergraph};
use sphnn_core::metrics;
use sphnn_core::model::{forward, loss_and_predictions, ModelConfig, ModelParams};
use sphnn_core::motif::{enumerate_instances, parse_motif, sample_instances};
use sphnn_core::train::{train, SplitMasks, TrainConfig, TrainOutcome};

use crate::config::RunConfig;
use crate::error::CliError;

/// A dataset plus the hypergraphs induced by the configured motifs.
/// `motif_sources` keeps the raw motif JSON so a checkpoint directory can
/// carry everything needed to rebuild the same bundle later.
pub struct Bundle {
    pub g: HeteroGraph,
    pub hgs: Vec<Hypergraph>,
    pub motif_sources: Vec<String>,
}

pub fn load_dataset(dir: &Path) -> Result<HeteroGraph, CliError> {
    Ok(load_graph(dir)?)
}

/// Per-motif outcome of enumeration, for build stats.
#[derive(Debug, Serialize)]
pub struct MotifStats {
    pub id: String,
    pub instances_found: usize,
    pub instances_kept: usize,
}

/// Enumerate one motif and build its hypergraph, honoring the sampling
/// cap. Motifs with zero instances produce stats but no hypergraph.
pub fn build_one(
    g: &HeteroGraph,
    motif_json: &str,
    max_instances: Option<usize>,
    sample_seed: u64,
) -> Result<(MotifStats, Option<Hypergraph>), CliError> {
    let pattern = parse_motif(motif_json, g)?;
    let found = enumerate_instances(g, &pattern);
    let kept = match max_instances {
        Some(k) if found.len() > k => sample_instances(&found, k, sample_seed),
        _ => found.clone(),
    };
    let stats = MotifStats {
        id: pattern.id.clone(),
        instances_found: found.len(),
        instances_kept: kept.len(),
    };
    if kept.is_empty() {
        return Ok((stats, None));
    }
    let hg = build_hypergraph(g, &kept)?;
    Ok((stats, Some(hg)))
}

/// Load the dataset and build every configured motif's hypergraph.
/// Empty motifs are dropped; it is an error if none survive.
pub fn build_bundle(cfg: &RunConfig) -> Result<Bundle, CliError> {
    let g = load_dataset(&cfg.data)?;
    let mut hgs = Vec::new();
    let mut motif_sources = Vec::new();
    for path in &cfg.motifs {
        let json = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let (_, hg) = build_one(&g, &json, cfg.max_instances, cfg.sample_seed)?;
        if let Some(hg) = hg {
            hgs.push(hg);
            motif_sources.push(json);
        }
    }
    if hgs.is_empty() {
        return Err(CliError::Data(
            "no motif produced any instances on this dataset".into(),
        ));
    }
    Ok(Bundle {
        g,
        hgs,
        motif_sources,
    })
}

pub fn train_model(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    bundle: &Bundle,
) -> Result<TrainOutcome, CliError> {
    Ok(train(mcfg, tcfg, &bundle.g, &bundle.hgs)?)
}

/// Metrics of one split under fixed parameters.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub n_nodes: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub fn eval_split(
    mcfg: &ModelConfig,
    params: &ModelParams,
    bundle: &Bundle,
    mask: &[NodeId],
) -> Result<SplitReport, CliError> {
    let labels: Vec<Option<usize>> = bundle.g.nodes().map(|v| bundle.g.label(v)).collect();
    let out = forward(mcfg, params, &bundle.g, &bundle.hgs, None)?;
    let (loss, preds) = loss_and_predictions(&out.z, &labels, mask)?;
    let mut y_true = Vec::with_capacity(mask.len());
    let mut y_pred = Vec::with_capacity(mask.len());
    for &v in mask {
        match labels[v.0] {
            Some(y) => {
                y_true.push(y);
                y_pred.push(preds[v.0]);
            }
            None => {
                return Err(CliError::Data(format!(
                    "node {} has no label but is in the evaluation split",
                    v.0
                )))
            }
        }
    }
    let m = metrics::evaluate(&y_true, &y_pred, bundle.g.q())
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(SplitReport {
        n_nodes: mask.len(),
        loss,
        accuracy: m.accuracy,
        macro_f1: m.macro_f1,
        micro_f1: m.micro_f1,
    })
}

pub fn mask_of<'a>(splits: &'a SplitMasks, name: &str) -> Result<&'a [NodeId], CliError> {
    match name {
        "train" => Ok(&splits.train),
        "val" => Ok(&splits.val),
        "test" => Ok(&splits.test),
        other => Err(CliError::Config(format!(
            "unknown split \"{other}\" (expected train, val, or test)"
        ))),
    }
}

/// Mean and sample standard deviation; one observation has deviation 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

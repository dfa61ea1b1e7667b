//! Stratified label splits and the training loop.
//!
//! Splits are stratified per class: a label-rate share of each class
//! (rounded up, at least one node) goes to training and the remainder is
//! halved into validation and test. Training runs AdamW over the
//! hand-derived gradients with early stopping on validation loss, and the
//! returned parameters are the snapshot from the best validation epoch.
//!
//! Everything is seeded: `seed` drives the split shuffle, `seed + 1` the
//! parameter init, and `seed + 2 + epoch` the dropout masks, so a run is
//! reproducible bit for bit from its config.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::{HeteroGraph, NodeId};
use crate::hypergraph::Hypergraph;
use crate::model::backward::backward;
use crate::model::{forward, loss_and_predictions, ModelConfig, ModelError, ModelParams};
use crate::numeric::{adam_step, AdamHyper, AdamState, NumericError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("class {class} has no labeled nodes to split")]
    EmptyClass { class: usize },
    #[error("graph has no labeled target nodes")]
    NoLabeledNodes,
    #[error("label rate {0} must lie strictly between 0 and 1")]
    BadRate(f64),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Disjoint node masks over the labeled target nodes, each sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMasks {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
    pub label_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Consecutive epochs without a validation-loss improvement before
    /// training stops.
    pub patience: usize,
    /// Share of each class's labeled nodes used for training.
    pub label_rate: f64,
    pub seed: u64,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 300,
            patience: 30,
            label_rate: 0.4,
            seed: 0,
            adam: AdamHyper::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch, or the final epoch when
    /// there is no validation set.
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub splits: SplitMasks,
}

/// Stratified split of the labeled target nodes.
///
/// Per class, `ceil(rate * n)` nodes (at least one) train; the remainder
/// splits into floor-half validation and the rest test. The ceiling is
/// taken with a small tolerance so that products like 0.4 * 50, which land
/// just above an integer in floating point, round to the integer.
pub fn split_nodes(g: &HeteroGraph, rate: f64, seed: u64) -> Result<SplitMasks, TrainError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(TrainError::BadRate(rate));
    }
    let labeled = g.labeled_targets();
    if labeled.is_empty() {
        return Err(TrainError::NoLabeledNodes);
    }
    let mut by_class: Vec<Vec<NodeId>> = vec![Vec::new(); g.q()];
    for (v, c) in labeled {
        by_class[c].push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (c, nodes) in by_class.iter_mut().enumerate() {
        if nodes.is_empty() {
            return Err(TrainError::EmptyClass { class: c });
        }
        nodes.shuffle(&mut rng);
        let n = nodes.len();
        let n_train = ((rate * n as f64 - 1e-9).ceil().max(1.0) as usize).min(n);
        let n_val = (n - n_train) / 2;
        train.extend(&nodes[..n_train]);
        val.extend(&nodes[n_train..n_train + n_val]);
        test.extend(&nodes[n_train + n_val..]);
    }
    train.sort();
    val.sort();
    test.sort();
    Ok(SplitMasks {
        train,
        val,
        test,
        label_rate: rate,
    })
}

fn as_diverged(e: TrainError, epoch: usize) -> TrainError {
    let non_finite = match &e {
        TrainError::Model(ModelError::NonFinite(_)) => true,
        TrainError::Model(ModelError::Numeric(n)) | TrainError::Numeric(n) => {
            matches!(n, NumericError::NonFinite { .. })
        }
        _ => false,
    };
    if non_finite {
        TrainError::Diverged { epoch }
    } else {
        e
    }
}

/// Split the graph by `cfg.label_rate` and train on it.
pub fn train(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    g: &HeteroGraph,
    hgs: &[Hypergraph],
) -> Result<TrainOutcome, TrainError> {
    let splits = split_nodes(g, cfg.label_rate, cfg.seed)?;
    train_with_splits(model_cfg, cfg, g, hgs, splits)
}

/// Train with caller-provided masks.
///
/// Each epoch runs one full-batch forward/backward on the training mask,
/// steps every tensor with AdamW (the self-connection weight only when the
/// model config trains it, clamped to (0, 1]), then re-evaluates without
/// dropout for the validation curve. With an empty validation mask the
/// loop runs all epochs and returns the final parameters; validation
/// columns are NaN in that case.
pub fn train_with_splits(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    g: &HeteroGraph,
    hgs: &[Hypergraph],
    splits: SplitMasks,
) -> Result<TrainOutcome, TrainError> {
    model_cfg.validate()?;
    let labels: Vec<Option<usize>> = g.nodes().map(|v| g.label(v)).collect();
    let mut params = ModelParams::init(model_cfg, g, hgs, cfg.seed.wrapping_add(1))?;
    // Zero attention vector = uniform columns on the first forward; a random
    // start instead bakes arbitrary member rankings into the early epochs.
    params.a_att.data_mut().fill(0.0);
    let info = params.tensor_info();
    let mut states: Vec<AdamState> = params
        .tensors()
        .iter()
        .map(|m| AdamState::new(m.rows(), m.cols(), cfg.adam))
        .collect();
    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut step = || -> Result<(f64, f64, f64), TrainError> {
            let dropout_seed = (model_cfg.dropout > 0.0)
                .then(|| cfg.seed.wrapping_add(2).wrapping_add(epoch as u64));
            let out = forward(model_cfg, &params, g, hgs, dropout_seed)?;
            let (train_loss, _) = loss_and_predictions(&out.z, &labels, &splits.train)?;
            let grads = backward(model_cfg, &params, g, hgs, &out, &labels, &splits.train)?;
            let grad_tensors = grads.tensors();
            let mut param_tensors = params.tensors_mut();
            for (i, (name, decay)) in info.iter().enumerate() {
                if name == "lambda" {
                    if !model_cfg.train_lambda {
                        continue;
                    }
                    adam_step(param_tensors[i], grad_tensors[i], &mut states[i], *decay)?;
                    let clamped = param_tensors[i].get(0, 0).clamp(1e-3, 1.0);
                    param_tensors[i].set(0, 0, clamped);
                } else {
                    adam_step(param_tensors[i], grad_tensors[i], &mut states[i], *decay)?;
                }
            }
            if splits.val.is_empty() {
                return Ok((train_loss, f64::NAN, f64::NAN));
            }
            let eval = forward(model_cfg, &params, g, hgs, None)?;
            let (val_loss, preds) = loss_and_predictions(&eval.z, &labels, &splits.val)?;
            let correct = splits
                .val
                .iter()
                .filter(|&&v| labels[v.0] == Some(preds[v.0]))
                .count();
            Ok((train_loss, val_loss, correct as f64 / splits.val.len() as f64))
        };
        let (train_loss, val_loss, val_acc) = match step() {
            Ok(v) => v,
            Err(e) => return Err(as_diverged(e, epoch)),
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        });
        if !splits.val.is_empty() {
            if best.as_ref().map_or(true, |&(_, b, _)| val_loss < b) {
                best = Some((epoch, val_loss, params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }

    let (best_epoch, final_params) = match best {
        Some((e, _, p)) => (Some(e), p),
        None => (None, params),
    };
    Ok(TrainOutcome {
        params: final_params,
        history,
        best_epoch,
        splits,
    })
}

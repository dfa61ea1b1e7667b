//! The network: per-type feature projection, hyperedge attention over each
//! motif hypergraph, self-connection-weighted hypergraph convolution, and
//! attention fusion of the per-motif outputs into one classification head.
//!
//! Forward passes live in [`ops`], hand-derived gradients in [`backward`],
//! and a dense reference implementation for cross-checking in [`reference`].

pub mod backward;
pub mod ops;
pub mod reference;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ops::{
    attention_incidence, edge_features, forward, hyperconv_layer, loss_and_predictions,
    project_features, semantic_fusion, uniform_incidence, AttentionCache, ConvCache, ForwardCache,
    ForwardOutput, FusionCache, FusionOutput, LayerCache, SparseIncidence,
};

use crate::hin::HeteroGraph;
use crate::hypergraph::Hypergraph;
use crate::numeric::{Matrix, NumericError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("no projection for node type \"{0}\"")]
    MissingProjection(String),
    #[error("params were built for motifs {expected:?}, forward got {got:?}")]
    MismatchedParams {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("no non-empty hypergraph to run on")]
    EmptyBundle,
    #[error("concatenating accumulation needs a fixed arity and a projection: {0}")]
    ConcatShape(String),
    #[error("labeled mask is empty")]
    EmptyMask,
    #[error("node {0} is in the labeled mask but has no label")]
    UnlabeledMaskNode(usize),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

/// How a hyperedge's feature vector is accumulated from its members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EdgeAccumulation {
    #[default]
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "1-norm")]
    OneNorm,
    #[serde(rename = "2-norm")]
    TwoNorm,
    #[serde(rename = "concat")]
    Concat,
}

/// Architecture hyperparameters. `validate` before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub q: usize,
    pub d_hidden: usize,
    pub d_att: usize,
    pub d_fuse: usize,
    pub layers: usize,
    /// Self-connection weight, in (0, 1].
    pub lambda: f64,
    pub leaky_slope: f64,
    pub edge_mode: EdgeAccumulation,
    /// Learn the learned-incidence attention; when off, incidence columns
    /// are uniform over members (the attention ablation).
    pub use_attention: bool,
    /// Update lambda during training; off by default, the sweep command
    /// searches it instead.
    pub train_lambda: bool,
    /// Dropout rate on hidden activations between layers, training only.
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(q: usize) -> Self {
        ModelConfig {
            q,
            d_hidden: 64,
            d_att: 64,
            d_fuse: 32,
            layers: 2,
            lambda: 0.25,
            leaky_slope: 0.2,
            edge_mode: EdgeAccumulation::Mean,
            use_attention: true,
            train_lambda: false,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::BadConfig(msg));
        if self.q < 2 {
            return bad(format!("q = {} but classification needs q >= 2", self.q));
        }
        if self.d_hidden == 0 || self.d_att == 0 || self.d_fuse == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.layers == 0 {
            return bad("layers must be >= 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda = {} outside (0, 1]", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout = {} outside [0, 1)", self.dropout));
        }
        if self.leaky_slope < 0.0 || self.leaky_slope >= 1.0 {
            return bad(format!("leaky_slope = {} outside [0, 1)", self.leaky_slope));
        }
        Ok(())
    }

    /// Input and output width of layer `l`. Every layer reads `d_hidden`;
    /// the last one emits class scores.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let out = if l + 1 == self.layers {
            self.q
        } else {
            self.d_hidden
        };
        (self.d_hidden, out)
    }
}

/// Every trainable tensor. The per-hypergraph vectors are aligned with the
/// hypergraph list the params were initialized from; `motif_ids` and
/// `type_names` pin that alignment and name tensors in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub type_names: Vec<String>,
    pub motif_ids: Vec<String>,
    /// Per node type: type_dim x d_hidden.
    pub u: Vec<Matrix>,
    /// Per hypergraph: d_hidden x d_att.
    pub p_att: Vec<Matrix>,
    /// 1 x 2*d_att, shared across hypergraphs.
    pub a_att: Matrix,
    /// [hypergraph][layer]: d_in x d_out.
    pub theta: Vec<Vec<Matrix>>,
    /// Per hypergraph, concat accumulation only: (arity * d_hidden) x d_hidden.
    pub w_cat: Vec<Option<Matrix>>,
    /// 1 x 1 self-connection scalar.
    pub lambda: Matrix,
    /// q x d_fuse.
    pub w_fuse: Matrix,
    /// 1 x d_fuse.
    pub b_fuse: Matrix,
    /// 1 x d_fuse.
    pub a_fuse: Matrix,
}

fn glorot(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

impl ModelParams {
    /// Seeded fan-scaled uniform initialization. Tensor sampling order is
    /// fixed, so a seed fully determines the parameters.
    pub fn init(
        cfg: &ModelConfig,
        g: &HeteroGraph,
        hgs: &[Hypergraph],
        seed: u64,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        if hgs.is_empty() {
            return Err(ModelError::EmptyBundle);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let type_names: Vec<String> = (0..g.n_types())
            .map(|t| g.type_name(crate::hin::NodeTypeId(t)).to_string())
            .collect();
        let motif_ids: Vec<String> = hgs.iter().map(|h| h.motif_id().to_string()).collect();

        let u = (0..g.n_types())
            .map(|t| glorot(&mut rng, g.type_dim(crate::hin::NodeTypeId(t)), cfg.d_hidden))
            .collect();
        let p_att = hgs
            .iter()
            .map(|_| glorot(&mut rng, cfg.d_hidden, cfg.d_att))
            .collect();
        let a_att = glorot(&mut rng, 1, 2 * cfg.d_att);
        let theta = hgs
            .iter()
            .map(|_| {
                (0..cfg.layers)
                    .map(|l| {
                        let (d_in, d_out) = cfg.layer_dims(l);
                        glorot(&mut rng, d_in, d_out)
                    })
                    .collect()
            })
            .collect();
        let w_cat = hgs
            .iter()
            .map(|hg| {
                if cfg.edge_mode != EdgeAccumulation::Concat {
                    return Ok(None);
                }
                let arity = hg.uniform_arity().ok_or_else(|| {
                    ModelError::ConcatShape(format!(
                        "hypergraph \"{}\" has mixed arities",
                        hg.motif_id()
                    ))
                })?;
                Ok(Some(glorot(&mut rng, arity * cfg.d_hidden, cfg.d_hidden)))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(ModelParams {
            type_names,
            motif_ids,
            u,
            p_att,
            a_att,
            theta,
            w_cat,
            lambda: Matrix::scalar(cfg.lambda),
            w_fuse: glorot(&mut rng, cfg.q, cfg.d_fuse),
            b_fuse: Matrix::zeros(1, cfg.d_fuse),
            a_fuse: glorot(&mut rng, 1, cfg.d_fuse),
        })
    }

    /// Same structure, all tensors zero. Gradient container.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        ModelParams {
            type_names: self.type_names.clone(),
            motif_ids: self.motif_ids.clone(),
            u: self.u.iter().map(z).collect(),
            p_att: self.p_att.iter().map(z).collect(),
            a_att: z(&self.a_att),
            theta: self
                .theta
                .iter()
                .map(|ls| ls.iter().map(z).collect())
                .collect(),
            w_cat: self
                .w_cat
                .iter()
                .map(|o| o.as_ref().map(z))
                .collect(),
            lambda: z(&self.lambda),
            w_fuse: z(&self.w_fuse),
            b_fuse: z(&self.b_fuse),
            a_fuse: z(&self.a_fuse),
        }
    }

    pub fn lambda_value(&self) -> f64 {
        self.lambda.get(0, 0)
    }

    pub fn set_lambda(&mut self, v: f64) {
        self.lambda.set(0, 0, v);
    }

    /// Checkpoint path, tensor, and whether weight decay applies, in a fixed
    /// order shared by [`Self::tensors`] and [`Self::tensors_mut`]. Decay
    /// covers weight matrices; attention vectors, biases, and lambda are
    /// exempt.
    pub fn tensor_info(&self) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        for name in &self.type_names {
            out.push((format!("u/{name}"), true));
        }
        for id in &self.motif_ids {
            out.push((format!("p_att/{id}"), true));
        }
        out.push(("a_att".to_string(), false));
        for (t, id) in self.motif_ids.iter().enumerate() {
            for l in 0..self.theta[t].len() {
                out.push((format!("theta/{id}/{l}"), true));
            }
        }
        for (t, id) in self.motif_ids.iter().enumerate() {
            if self.w_cat[t].is_some() {
                out.push((format!("w_cat/{id}"), true));
            }
        }
        out.push(("lambda".to_string(), false));
        out.push(("w_fuse".to_string(), true));
        out.push(("b_fuse".to_string(), false));
        out.push(("a_fuse".to_string(), false));
        out
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        out.extend(self.u.iter());
        out.extend(self.p_att.iter());
        out.push(&self.a_att);
        for ls in &self.theta {
            out.extend(ls.iter());
        }
        out.extend(self.w_cat.iter().flatten());
        out.push(&self.lambda);
        out.push(&self.w_fuse);
        out.push(&self.b_fuse);
        out.push(&self.a_fuse);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        out.extend(self.u.iter_mut());
        out.extend(self.p_att.iter_mut());
        out.push(&mut self.a_att);
        for ls in &mut self.theta {
            out.extend(ls.iter_mut());
        }
        out.extend(self.w_cat.iter_mut().flatten());
        out.push(&mut self.lambda);
        out.push(&mut self.w_fuse);
        out.push(&mut self.b_fuse);
        out.push(&mut self.a_fuse);
        out
    }
}

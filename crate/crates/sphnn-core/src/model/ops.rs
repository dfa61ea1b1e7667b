//! Forward operations. Each returns the cache its backward pass needs.
//!
//! Per hypergraph and per layer the pipeline is: accumulate hyperedge
//! features from members, score each member against its hyperedge to get a
//! learned incidence (softmax over the edge's members), then propagate
//! through the degree-normalized incidence with a weighted self-connection.
//! Per-motif outputs are fused by a second attention over motifs.

use rand::{Rng, SeedableRng};

use crate::hin::{HeteroGraph, NodeId};
use crate::hypergraph::Hypergraph;
use crate::model::{EdgeAccumulation, ModelConfig, ModelError, ModelParams};
use crate::numeric::{
    leaky_relu, leaky_relu_mat, matmul, softmax_slice, row_softmax, Matrix,
};

/// Incidence values aligned with each hyperedge's member list:
/// `values[e][i]` belongs to `hg.members(e)[i]`. The sparsity pattern is the
/// structural incidence by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseIncidence {
    pub values: Vec<Vec<f64>>,
}

impl SparseIncidence {
    pub fn to_dense(&self, hg: &Hypergraph) -> Matrix {
        let mut m = Matrix::zeros(hg.n_nodes(), hg.n_edges());
        for (e, vals) in self.values.iter().enumerate() {
            for (i, &v) in hg.members(e).iter().enumerate() {
                m.set(v.0, e, vals[i]);
            }
        }
        m
    }
}

/// Attention-free incidence: every member of edge `e` gets weight
/// 1/delta(e). Equals the attention output when all scores tie.
pub fn uniform_incidence(hg: &Hypergraph) -> SparseIncidence {
    SparseIncidence {
        values: (0..hg.n_edges())
            .map(|e| {
                let m = hg.members(e).len();
                vec![1.0 / m as f64; m]
            })
            .collect(),
    }
}

/// Unifies per-type feature spaces: row v of the output is the node's raw
/// feature vector times its type's projection.
pub fn project_features(g: &HeteroGraph, u: &[Matrix]) -> Result<Matrix, ModelError> {
    if u.len() != g.n_types() {
        return Err(ModelError::MissingProjection(format!(
            "{} projections for {} types",
            u.len(),
            g.n_types()
        )));
    }
    let d_hidden = u
        .first()
        .map(Matrix::cols)
        .ok_or_else(|| ModelError::MissingProjection("no types".into()))?;
    for (t, proj) in u.iter().enumerate() {
        let t = crate::hin::NodeTypeId(t);
        if proj.rows() != g.type_dim(t) || proj.cols() != d_hidden {
            return Err(ModelError::MissingProjection(format!(
                "projection for type \"{}\" is {}x{}, expected {}x{}",
                g.type_name(t),
                proj.rows(),
                proj.cols(),
                g.type_dim(t),
                d_hidden
            )));
        }
    }
    let mut out = Matrix::zeros(g.n_nodes(), d_hidden);
    for v in g.nodes() {
        let proj = &u[g.node_type(v).0];
        let feats = g.node_features(v);
        let row = out.row_mut(v.0);
        for (k, &f) in feats.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            for (o, &p) in row.iter_mut().zip(proj.row(k)) {
                *o += f * p;
            }
        }
    }
    if !out.is_finite() {
        return Err(ModelError::NonFinite("projected features"));
    }
    Ok(out)
}

/// Accumulates one feature row per hyperedge from its members' rows.
/// Mean and the elementwise p-norms keep the width; concatenation (in role
/// order, fixed arity) is mapped back to the input width by `w_cat`.
pub fn edge_features(
    hg: &Hypergraph,
    x: &Matrix,
    mode: EdgeAccumulation,
    w_cat: Option<&Matrix>,
) -> Result<Matrix, ModelError> {
    assert_eq!(x.rows(), hg.n_nodes(), "feature rows must cover all nodes");
    let d = x.cols();
    let ne = hg.n_edges();
    let mut out = Matrix::zeros(ne, d);
    match mode {
        EdgeAccumulation::Mean => {
            for e in 0..ne {
                let members = hg.members(e);
                let inv = 1.0 / members.len() as f64;
                let row = out.row_mut(e);
                for &v in members {
                    for (o, &xv) in row.iter_mut().zip(x.row(v.0)) {
                        *o += inv * xv;
                    }
                }
            }
        }
        EdgeAccumulation::OneNorm => {
            for e in 0..ne {
                let row = out.row_mut(e);
                for &v in hg.members(e) {
                    for (o, &xv) in row.iter_mut().zip(x.row(v.0)) {
                        *o += xv.abs();
                    }
                }
            }
        }
        EdgeAccumulation::TwoNorm => {
            for e in 0..ne {
                let row = out.row_mut(e);
                for &v in hg.members(e) {
                    for (o, &xv) in row.iter_mut().zip(x.row(v.0)) {
                        *o += xv * xv;
                    }
                }
                for o in row.iter_mut() {
                    *o = o.sqrt();
                }
            }
        }
        EdgeAccumulation::Concat => {
            let arity = hg.uniform_arity().ok_or_else(|| {
                ModelError::ConcatShape(format!(
                    "hypergraph \"{}\" mixes arities",
                    hg.motif_id()
                ))
            })?;
            let w = w_cat.ok_or_else(|| {
                ModelError::ConcatShape("missing concat projection".into())
            })?;
            if w.rows() != arity * d || w.cols() != d {
                return Err(ModelError::ConcatShape(format!(
                    "projection is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    arity * d,
                    d
                )));
            }
            for e in 0..ne {
                let row = out.row_mut(e);
                for (i, &v) in hg.members(e).iter().enumerate() {
                    for (k, &xv) in x.row(v.0).iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        for (o, &wv) in row.iter_mut().zip(w.row(i * d + k)) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Cache for the attention backward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    /// Projection folded into the shared vector's two halves: p * a1, p * a2.
    pub pa1: Vec<f64>,
    pub pa2: Vec<f64>,
    /// Node-side and edge-side score parts: alpha[v] + beta[e] is the raw
    /// logit of member v in edge e.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Raw logits per edge member, before the LeakyReLU.
    pub raw: Vec<Vec<f64>>,
}

/// Learned incidence: each member of edge e scores
/// LeakyReLU(a_att . [x_v P || x_e P]) and the edge's members softmax to
/// probabilities. Columns therefore sum to 1 over members.
///
/// Because the score is linear in the concatenation, it decomposes into
/// x_v . (P a1) + x_e . (P a2) with a_att = [a1 || a2]; folding P into the
/// two halves first makes scoring O((N + E) d) instead of O(E m d d_att).
pub fn attention_incidence(
    hg: &Hypergraph,
    x: &Matrix,
    xe: &Matrix,
    p: &Matrix,
    a_att: &Matrix,
    slope: f64,
) -> Result<(SparseIncidence, AttentionCache), ModelError> {
    let d = x.cols();
    let d_att = p.cols();
    assert_eq!(p.rows(), d, "projection rows must match feature width");
    assert_eq!(xe.cols(), d, "edge features must match feature width");
    assert_eq!(xe.rows(), hg.n_edges());
    assert_eq!(a_att.shape(), (1, 2 * d_att), "attention vector is 2*d_att");

    let a1 = &a_att.data()[..d_att];
    let a2 = &a_att.data()[d_att..];
    let mut pa1 = vec![0.0; d];
    let mut pa2 = vec![0.0; d];
    for k in 0..d {
        let prow = p.row(k);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for j in 0..d_att {
            s1 += prow[j] * a1[j];
            s2 += prow[j] * a2[j];
        }
        pa1[k] = s1;
        pa2[k] = s2;
    }
    let dot = |row: &[f64], v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let alpha: Vec<f64> = (0..x.rows()).map(|i| dot(x.row(i), &pa1)).collect();
    let beta: Vec<f64> = (0..xe.rows()).map(|e| dot(xe.row(e), &pa2)).collect();

    let mut raw = Vec::with_capacity(hg.n_edges());
    let mut values = Vec::with_capacity(hg.n_edges());
    for e in 0..hg.n_edges() {
        let members = hg.members(e);
        let raw_e: Vec<f64> = members.iter().map(|&v| alpha[v.0] + beta[e]).collect();
        if raw_e.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("attention scores"));
        }
        let scores: Vec<f64> = raw_e.iter().map(|&r| leaky_relu(r, slope)).collect();
        let mut probs = vec![0.0; members.len()];
        softmax_slice(&scores, &mut probs);
        raw.push(raw_e);
        values.push(probs);
    }
    Ok((
        SparseIncidence { values },
        AttentionCache {
            pa1,
            pa2,
            alpha,
            beta,
            raw,
        },
    ))
}

/// Cache for one convolution layer's backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    /// 1/sqrt(d(v)), or 0 where d(v) = 0 (pseudo-inverse convention).
    pub dv_isqrt: Vec<f64>,
    /// w_e / delta(e) per edge.
    pub edge_scale: Vec<f64>,
    /// x * theta.
    pub m: Matrix,
    /// Row-scaled m: D_v^{-1/2} m.
    pub t: Matrix,
    /// Edge aggregate after weighting: per edge, (w_e/delta) * sum of
    /// incidence-weighted t rows.
    pub g_prime: Matrix,
    /// Pre-activation lambda*m + propagated term.
    pub apre: Matrix,
    pub activated: bool,
}

/// One convolution layer:
/// y = sigma((lambda I + D_v^{-1/2} Hh W D_e^{-1} Hh^T D_v^{-1/2}) x theta)
/// with Hh the (learned) incidence, W the unit edge-weight diagonal, and the
/// degree matrices taken from the structural incidence. Nodes no hyperedge
/// covers have d(v) = 0 and receive only their lambda-weighted self term.
/// sigma is a LeakyReLU for hidden layers, identity for the last.
pub fn hyperconv_layer(
    hg: &Hypergraph,
    x: &Matrix,
    inc: &SparseIncidence,
    lambda: f64,
    theta: &Matrix,
    activate: bool,
    slope: f64,
) -> Result<(Matrix, ConvCache), ModelError> {
    assert_eq!(x.rows(), hg.n_nodes());
    let n = hg.n_nodes();
    let d_out = theta.cols();
    let m = matmul(x, theta)?;

    let dv_isqrt: Vec<f64> = hg
        .node_degrees()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let edge_scale: Vec<f64> = hg
        .edge_degrees()
        .iter()
        .zip(hg.weights())
        .map(|(&delta, &w)| w / delta)
        .collect();

    let mut t = m.clone();
    for v in 0..n {
        let s = dv_isqrt[v];
        for val in t.row_mut(v) {
            *val *= s;
        }
    }

    let mut g_prime = Matrix::zeros(hg.n_edges(), d_out);
    for e in 0..hg.n_edges() {
        let row = g_prime.row_mut(e);
        for (i, &v) in hg.members(e).iter().enumerate() {
            let w = inc.values[e][i];
            for (o, &tv) in row.iter_mut().zip(t.row(v.0)) {
                *o += w * tv;
            }
        }
        let s = edge_scale[e];
        for o in row.iter_mut() {
            *o *= s;
        }
    }

    let mut apre = Matrix::zeros(n, d_out);
    for e in 0..hg.n_edges() {
        let gp = g_prime.row(e);
        for (i, &v) in hg.members(e).iter().enumerate() {
            let w = inc.values[e][i];
            let row = apre.row_mut(v.0);
            for (o, &gv) in row.iter_mut().zip(gp) {
                *o += w * gv;
            }
        }
    }
    for v in 0..n {
        let s = dv_isqrt[v];
        let mrow = m.row(v);
        let row = apre.row_mut(v);
        for (o, &mv) in row.iter_mut().zip(mrow) {
            *o = s * *o + lambda * mv;
        }
    }
    if !apre.is_finite() {
        return Err(ModelError::NonFinite("convolution output"));
    }
    let y = if activate {
        leaky_relu_mat(&apre, slope)
    } else {
        apre.clone()
    };
    Ok((
        y,
        ConvCache {
            dv_isqrt,
            edge_scale,
            m,
            t,
            g_prime,
            apre,
            activated: activate,
        },
    ))
}

/// Fusion cache: the tanh-projected rows per motif plus the motif scores.
#[derive(Debug, Clone)]
pub struct FusionCache {
    pub h_tanh: Vec<Matrix>,
    pub scores: Vec<f64>,
    pub coeffs: Vec<f64>,
}

pub struct FusionOutput {
    pub coeffs: Vec<f64>,
    pub z: Matrix,
    pub cache: FusionCache,
}

/// Attention over motifs: each per-motif output Z_t is scored by a shared
/// projection, score_t = mean over nodes of a_fuse . tanh(z W_fuse + b),
/// the scores softmax into coefficients, and Z is the coefficient-weighted
/// sum of the Z_t.
pub fn semantic_fusion(
    z_list: &[Matrix],
    w_fuse: &Matrix,
    b_fuse: &Matrix,
    a_fuse: &Matrix,
) -> Result<FusionOutput, ModelError> {
    if z_list.is_empty() {
        return Err(ModelError::EmptyBundle);
    }
    let (n, q) = z_list[0].shape();
    for z in z_list {
        assert_eq!(z.shape(), (n, q), "fusion inputs must share shape");
    }
    assert_eq!(w_fuse.rows(), q);
    let d_f = w_fuse.cols();
    assert_eq!(b_fuse.shape(), (1, d_f));
    assert_eq!(a_fuse.shape(), (1, d_f));

    let mut h_tanh = Vec::with_capacity(z_list.len());
    let mut scores = Vec::with_capacity(z_list.len());
    for z in z_list {
        let mut h = matmul(z, w_fuse)?;
        for i in 0..n {
            for (hv, &b) in h.row_mut(i).iter_mut().zip(b_fuse.row(0)) {
                *hv = (*hv + b).tanh();
            }
        }
        let mut total = 0.0;
        for i in 0..n {
            for (hv, av) in h.row(i).iter().zip(a_fuse.row(0)) {
                total += hv * av;
            }
        }
        scores.push(total / n as f64);
        h_tanh.push(h);
    }
    let mut coeffs = vec![0.0; scores.len()];
    softmax_slice(&scores, &mut coeffs);

    let mut z = Matrix::zeros(n, q);
    for (c, zt) in coeffs.iter().zip(z_list) {
        for (o, &v) in z.data_mut().iter_mut().zip(zt.data()) {
            *o += c * v;
        }
    }
    Ok(FusionOutput {
        coeffs: coeffs.clone(),
        z,
        cache: FusionCache {
            h_tanh,
            scores,
            coeffs,
        },
    })
}

/// Mean negative log-likelihood of the labeled mask under row-softmaxed
/// logits, plus argmax predictions for every row.
pub fn loss_and_predictions(
    z: &Matrix,
    labels: &[Option<usize>],
    mask: &[NodeId],
) -> Result<(f64, Vec<usize>), ModelError> {
    if mask.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    assert_eq!(labels.len(), z.rows());
    if !z.is_finite() {
        return Err(ModelError::NonFinite("logits"));
    }
    let probs = row_softmax(z);
    let mut loss = 0.0;
    for &v in mask {
        let y = labels[v.0].ok_or(ModelError::UnlabeledMaskNode(v.0))?;
        loss -= probs.get(v.0, y).ln();
    }
    loss /= mask.len() as f64;
    let predictions = (0..z.rows())
        .map(|i| {
            let row = z.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok((loss, predictions))
}

/// Everything the backward pass needs from one forward run.
pub struct ForwardCache {
    /// Projected, type-unified input features.
    pub x0: Matrix,
    pub hg_layers: Vec<Vec<LayerCache>>,
    pub z_list: Vec<Matrix>,
    pub fusion: FusionCache,
}

pub struct LayerCache {
    /// The layer's input (after any dropout applied to the previous output).
    pub x_in: Matrix,
    /// Hyperedge features; absent when attention is disabled (they feed
    /// nothing else).
    pub xe: Option<Matrix>,
    pub inc: SparseIncidence,
    pub att: Option<AttentionCache>,
    pub conv: ConvCache,
    /// Inverted-dropout mask applied to this layer's activated output.
    pub out_mask: Option<Matrix>,
}

pub struct ForwardOutput {
    /// Fused logits, N x q.
    pub z: Matrix,
    pub coeffs: Vec<f64>,
    pub cache: ForwardCache,
}

fn check_alignment(params: &ModelParams, hgs: &[Hypergraph]) -> Result<(), ModelError> {
    let got: Vec<String> = hgs.iter().map(|h| h.motif_id().to_string()).collect();
    if params.motif_ids != got {
        return Err(ModelError::MismatchedParams {
            expected: params.motif_ids.clone(),
            got,
        });
    }
    Ok(())
}

/// Full forward pass over every hypergraph, ending in fused logits.
/// `dropout_seed` enables the training-time dropout masks; pass `None` for
/// evaluation (and whenever gradients will be checked against finite
/// differences).
pub fn forward(
    cfg: &ModelConfig,
    params: &ModelParams,
    g: &HeteroGraph,
    hgs: &[Hypergraph],
    dropout_seed: Option<u64>,
) -> Result<ForwardOutput, ModelError> {
    cfg.validate()?;
    if hgs.is_empty() {
        return Err(ModelError::EmptyBundle);
    }
    check_alignment(params, hgs)?;
    let lambda = params.lambda_value();
    let x0 = project_features(g, &params.u)?;
    let mut dropout_rng = dropout_seed.map(rand_chacha::ChaCha8Rng::seed_from_u64);

    let mut hg_layers = Vec::with_capacity(hgs.len());
    let mut z_list = Vec::with_capacity(hgs.len());
    for (t, hg) in hgs.iter().enumerate() {
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut x = x0.clone();
        for l in 0..cfg.layers {
            let activate = l + 1 < cfg.layers;
            let (xe, inc, att) = if cfg.use_attention {
                let xe = edge_features(hg, &x, cfg.edge_mode, params.w_cat[t].as_ref())?;
                let (inc, att) =
                    attention_incidence(hg, &x, &xe, &params.p_att[t], &params.a_att, cfg.leaky_slope)?;
                (Some(xe), inc, Some(att))
            } else {
                (None, uniform_incidence(hg), None)
            };
            let (mut y, conv) = hyperconv_layer(
                hg,
                &x,
                &inc,
                lambda,
                &params.theta[t][l],
                activate,
                cfg.leaky_slope,
            )?;
            let out_mask = match (&mut dropout_rng, activate && cfg.dropout > 0.0) {
                (Some(rng), true) => {
                    let keep = 1.0 - cfg.dropout;
                    let mask = Matrix::from_vec(
                        y.rows(),
                        y.cols(),
                        (0..y.rows() * y.cols())
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect(),
                    );
                    for (yv, &mv) in y.data_mut().iter_mut().zip(mask.data()) {
                        *yv *= mv;
                    }
                    Some(mask)
                }
                _ => None,
            };
            layers.push(LayerCache {
                x_in: x,
                xe,
                inc,
                att,
                conv,
                out_mask,
            });
            x = y;
        }
        z_list.push(x);
        hg_layers.push(layers);
    }

    let fused = semantic_fusion(&z_list, &params.w_fuse, &params.b_fuse, &params.a_fuse)?;
    Ok(ForwardOutput {
        z: fused.z,
        coeffs: fused.coeffs,
        cache: ForwardCache {
            x0,
            hg_layers,
            z_list,
            fusion: fused.cache,
        },
    })
}

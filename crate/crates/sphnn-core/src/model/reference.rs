//! Independently coded dense forward used to cross-check the sparse
//! pipeline. It covers the attention-free model only: the incidence is the
//! structural one column-normalized by edge degree, and every step is an
//! explicit dense matrix product. It shares nothing with [`super::ops`]
//! beyond the `Matrix` type, so agreement between the two is evidence for
//! both.

use crate::hin::HeteroGraph;
use crate::hypergraph::Hypergraph;
use crate::model::{ModelConfig, ModelError, ModelParams};
use crate::numeric::{leaky_relu_mat, matmul, softmax_slice, transpose, Matrix};

/// Dense forward to fused logits. Errors if the config asks for attention;
/// the sparse path is the only implementation of that.
pub fn reference_forward(
    cfg: &ModelConfig,
    params: &ModelParams,
    g: &HeteroGraph,
    hgs: &[Hypergraph],
) -> Result<Matrix, ModelError> {
    cfg.validate()?;
    if cfg.use_attention {
        return Err(ModelError::BadConfig(
            "dense reference implements the attention-free model only".into(),
        ));
    }
    if hgs.is_empty() {
        return Err(ModelError::EmptyBundle);
    }
    let lambda = params.lambda_value();
    let n = g.n_nodes();

    let d_hidden = params.u[0].cols();
    let mut x0 = Matrix::zeros(n, d_hidden);
    for v in g.nodes() {
        let feats = Matrix::row_vector(g.node_features(v).to_vec());
        let projected = matmul(&feats, &params.u[g.node_type(v).0])?;
        x0.row_mut(v.0).copy_from_slice(projected.row(0));
    }

    let mut z_list = Vec::with_capacity(hgs.len());
    for (t, hg) in hgs.iter().enumerate() {
        let h = hg.incidence_dense();
        let ne = hg.n_edges();
        let mut de_inv = Matrix::zeros(ne, ne);
        for (e, &delta) in hg.edge_degrees().iter().enumerate() {
            de_inv.set(e, e, 1.0 / delta);
        }
        let mut w = Matrix::zeros(ne, ne);
        for (e, &we) in hg.weights().iter().enumerate() {
            w.set(e, e, we);
        }
        let mut dv_isqrt = Matrix::zeros(n, n);
        for (v, &dv) in hg.node_degrees().iter().enumerate() {
            dv_isqrt.set(v, v, if dv > 0.0 { 1.0 / dv.sqrt() } else { 0.0 });
        }
        let hh = matmul(&h, &de_inv)?;
        let mut op = matmul(&dv_isqrt, &hh)?;
        op = matmul(&op, &w)?;
        op = matmul(&op, &de_inv)?;
        op = matmul(&op, &transpose(&hh))?;
        op = matmul(&op, &dv_isqrt)?;
        for v in 0..n {
            op.set(v, v, op.get(v, v) + lambda);
        }

        let mut x = x0.clone();
        for l in 0..cfg.layers {
            let pre = matmul(&op, &matmul(&x, &params.theta[t][l])?)?;
            x = if l + 1 < cfg.layers {
                leaky_relu_mat(&pre, cfg.leaky_slope)
            } else {
                pre
            };
        }
        z_list.push(x);
    }

    // Fusion, via a ones-vector contraction instead of accumulation loops.
    let ones = Matrix::row_vector(vec![1.0; n]);
    let mut scores = Vec::with_capacity(z_list.len());
    for z in &z_list {
        let mut h = matmul(z, &params.w_fuse)?;
        for i in 0..n {
            for (hv, &b) in h.row_mut(i).iter_mut().zip(params.b_fuse.row(0)) {
                *hv = (*hv + b).tanh();
            }
        }
        let col_sums = matmul(&ones, &h)?;
        let s = matmul(&col_sums, &transpose(&params.a_fuse))?;
        scores.push(s.get(0, 0) / n as f64);
    }
    let mut coeffs = vec![0.0; scores.len()];
    softmax_slice(&scores, &mut coeffs);
    let mut z = Matrix::zeros(n, z_list[0].cols());
    for (c, zt) in coeffs.iter().zip(&z_list) {
        for (o, &v) in z.data_mut().iter_mut().zip(zt.data()) {
            *o += c * v;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{GraphBuilder, NodeId};
    use crate::model::backward::grad_check_fixture;
    use crate::model::ops::forward;

    fn no_attention_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::new(2);
        cfg.d_hidden = 6;
        cfg.d_att = 5;
        cfg.d_fuse = 4;
        cfg.use_attention = false;
        cfg
    }

    #[test]
    fn sparse_forward_matches_dense_reference_at_lambda_one() {
        let (g, hgs, _) = grad_check_fixture();
        let mut cfg = no_attention_cfg();
        cfg.lambda = 1.0;
        let params = ModelParams::init(&cfg, &g, &hgs, 41).unwrap();
        let sparse = forward(&cfg, &params, &g, &hgs, None).unwrap();
        let dense = reference_forward(&cfg, &params, &g, &hgs).unwrap();
        assert!(sparse.z.max_abs_diff(&dense) < 1e-10);
    }

    #[test]
    fn sparse_forward_matches_dense_reference_at_default_lambda() {
        let (g, hgs, _) = grad_check_fixture();
        let cfg = no_attention_cfg();
        let params = ModelParams::init(&cfg, &g, &hgs, 43).unwrap();
        let sparse = forward(&cfg, &params, &g, &hgs, None).unwrap();
        let dense = reference_forward(&cfg, &params, &g, &hgs).unwrap();
        assert!(sparse.z.max_abs_diff(&dense) < 1e-10);
    }

    #[test]
    fn single_hypergraph_bundle_matches() {
        let (g, hgs, _) = grad_check_fixture();
        let single = vec![hgs.into_iter().next().unwrap()];
        let mut cfg = no_attention_cfg();
        cfg.lambda = 1.0;
        let params = ModelParams::init(&cfg, &g, &single, 47).unwrap();
        let sparse = forward(&cfg, &params, &g, &single, None).unwrap();
        let dense = reference_forward(&cfg, &params, &g, &single).unwrap();
        assert!(sparse.z.max_abs_diff(&dense) < 1e-10);
    }

    #[test]
    fn reference_rejects_attention_config() {
        let (g, hgs, _) = grad_check_fixture();
        let mut cfg = no_attention_cfg();
        cfg.use_attention = true;
        let params = ModelParams::init(&cfg, &g, &hgs, 1).unwrap();
        assert!(matches!(
            reference_forward(&cfg, &params, &g, &hgs),
            Err(ModelError::BadConfig(_))
        ));
    }

    #[test]
    fn forward_is_node_permutation_equivariant() {
        // Rebuild the fixture graph with nodes inserted in a different
        // order and compare logits row-by-row through the node keys.
        let (g1, hgs1, _) = grad_check_fixture();
        let mut b = GraphBuilder::new();
        let t_author = b.node_type("author", 3);
        let t_paper = b.node_type("paper", 4);
        let t_venue = b.node_type("venue", 2);
        b.edge_type("writes");
        b.edge_type("published_in");
        let perm = [9usize, 4, 0, 5, 3, 8, 6, 1, 7, 2];
        for &old in &perm {
            let v = NodeId(old);
            let t = match g1.type_name(g1.node_type(v)) {
                "author" => t_author,
                "paper" => t_paper,
                _ => t_venue,
            };
            let nv = b.add_node(g1.node_key(v), t).unwrap();
            b.set_features(nv, g1.node_features(v).to_vec()).unwrap();
            if let Some(c) = g1.label(v) {
                b.set_label(nv, c);
            }
        }
        for &(src, dst, et) in g1.edges() {
            let s = b.lookup(g1.node_key(src)).unwrap();
            let d = b.lookup(g1.node_key(dst)).unwrap();
            b.add_edge(s, d, et).unwrap();
        }
        let g2 = b.finish(2, t_paper).unwrap();

        use crate::hypergraph::build_hypergraph;
        use crate::motif::{enumerate_instances, parse_motif};
        let motifs = [
            r#"{"id":"APA","roles":[{"name":"a1","type":"author"},{"name":"p","type":"paper"},{"name":"a2","type":"author"}],"edges":[["a1","p","writes"],["a2","p","writes"]]}"#,
            r#"{"id":"PVP","roles":[{"name":"p1","type":"paper"},{"name":"v","type":"venue"},{"name":"p2","type":"paper"}],"edges":[["p1","v","published_in"],["p2","v","published_in"]]}"#,
        ];
        let hgs2: Vec<_> = motifs
            .iter()
            .map(|m| {
                let p = parse_motif(m, &g2).unwrap();
                build_hypergraph(&g2, &enumerate_instances(&g2, &p)).unwrap()
            })
            .collect();

        let mut cfg = ModelConfig::new(2);
        cfg.d_hidden = 6;
        cfg.d_att = 5;
        cfg.d_fuse = 4;
        let p1 = ModelParams::init(&cfg, &g1, &hgs1, 53).unwrap();
        let p2 = ModelParams::init(&cfg, &g2, &hgs2, 53).unwrap();
        // Parameters depend on types and shapes, not node identity.
        assert_eq!(p1, p2);
        let z1 = forward(&cfg, &p1, &g1, &hgs1, None).unwrap().z;
        let z2 = forward(&cfg, &p2, &g2, &hgs2, None).unwrap().z;
        let index: std::collections::HashMap<&str, NodeId> =
            g2.nodes().map(|w| (g2.node_key(w), w)).collect();
        for v in g1.nodes() {
            let w = index[g1.node_key(v)];
            for (a, b) in z1.row(v.0).iter().zip(z2.row(w.0)) {
                assert!((a - b).abs() < 1e-10, "node {}", g1.node_key(v));
            }
        }
    }
}

//! Hypergraph built from motif instances, with its incidence structure,
//! degree vectors, and clique-expansion adjacency.
//!
//! The node index space is always the full node set of the source graph, not
//! just the covered nodes: downstream fusion sums per-motif outputs row by
//! row, so every motif's matrices must share the same row space. Nodes no
//! instance covers simply have degree 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::{HeteroGraph, NodeId};
use crate::motif::InstanceSet;
use crate::numeric::Matrix;

#[derive(Debug, Error)]
pub enum HypergraphError {
    #[error("motif \"{motif}\" matched no instances")]
    Empty { motif: String },
    #[error("instance references node {node} outside 0..{n_nodes}")]
    NodeOutOfRange { node: usize, n_nodes: usize },
}

/// Sparse incidence structure for one motif's hyperedges.
///
/// `members[e]` lists edge `e`'s nodes in the motif's role order (needed by
/// the concatenating accumulation mode); `node_edges[v]` lists the edges
/// containing `v`. The two views are kept consistent by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    motif_id: String,
    n_nodes: usize,
    members: Vec<Vec<NodeId>>,
    weights: Vec<f64>,
    node_edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn motif_id(&self) -> &str {
        &self.motif_id
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.members.len()
    }

    /// Member nodes of edge `e` in role order.
    pub fn members(&self, e: usize) -> &[NodeId] {
        &self.members[e]
    }

    /// Edges containing node `v`, ascending.
    pub fn edges_of(&self, v: NodeId) -> &[usize] {
        &self.node_edges[v.0]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True fixed arity shared by all edges, if there is one.
    pub fn uniform_arity(&self) -> Option<usize> {
        let first = self.members.first()?.len();
        self.members
            .iter()
            .all(|m| m.len() == first)
            .then_some(first)
    }

    /// d(v) = sum over edges containing v of the edge weight.
    pub fn node_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes];
        for (e, members) in self.members.iter().enumerate() {
            for &v in members {
                d[v.0] += self.weights[e];
            }
        }
        d
    }

    /// delta(e) = member count of edge e.
    pub fn edge_degrees(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.len() as f64).collect()
    }

    /// Clique-expansion adjacency A = H W Ht, dense. Both halves of each
    /// off-diagonal pair are written from the same product, so A is symmetric
    /// exactly, not just up to rounding.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n_nodes, self.n_nodes);
        for (e, members) in self.members.iter().enumerate() {
            let w = self.weights[e];
            for (i, &u) in members.iter().enumerate() {
                a.set(u.0, u.0, a.get(u.0, u.0) + w);
                for &v in &members[i + 1..] {
                    let sum = a.get(u.0, v.0) + w;
                    a.set(u.0, v.0, sum);
                    a.set(v.0, u.0, sum);
                }
            }
        }
        a
    }

    /// Dense incidence matrix H (N x edges). For inspection and tests; model
    /// code works off the sparse member lists.
    pub fn incidence_dense(&self) -> Matrix {
        let mut h = Matrix::zeros(self.n_nodes, self.n_edges());
        for (e, members) in self.members.iter().enumerate() {
            for &v in members {
                h.set(v.0, e, 1.0);
            }
        }
        h
    }

    pub fn export(&self) -> HypergraphExport {
        HypergraphExport {
            motif: self.motif_id.clone(),
            n_nodes: self.n_nodes,
            edges: self
                .members
                .iter()
                .map(|m| m.iter().map(|v| v.0).collect())
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

/// JSON shape of `--dump-hypergraph` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct HypergraphExport {
    pub motif: String,
    pub n_nodes: usize,
    pub edges: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

/// One hyperedge per instance, in the set's canonical order, all weights 1.
pub fn build_hypergraph(
    g: &HeteroGraph,
    set: &InstanceSet,
) -> Result<Hypergraph, HypergraphError> {
    if set.is_empty() {
        return Err(HypergraphError::Empty {
            motif: set.pattern_id.clone(),
        });
    }
    let n = g.n_nodes();
    let mut members = Vec::with_capacity(set.len());
    let mut node_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, inst) in set.instances.iter().enumerate() {
        debug_assert!(inst.assignment.len() >= 2);
        for &v in &inst.assignment {
            if v.0 >= n {
                return Err(HypergraphError::NodeOutOfRange {
                    node: v.0,
                    n_nodes: n,
                });
            }
            node_edges[v.0].push(e);
        }
        members.push(inst.assignment.clone());
    }
    Ok(Hypergraph {
        motif_id: set.pattern_id.clone(),
        n_nodes: n,
        members,
        weights: vec![1.0; set.len()],
        node_edges,
    })
}

/// One 2-node hyperedge per distinct graph edge, parallel edges across
/// edge types folded into the weight. Degrades hypergraph convolution to
/// plain pairwise graph convolution for the no-hypergraph ablation.
pub fn pairwise_hypergraph(g: &HeteroGraph) -> Result<Hypergraph, HypergraphError> {
    let mut counts: std::collections::BTreeMap<(NodeId, NodeId), f64> =
        std::collections::BTreeMap::new();
    for &(u, v, _) in g.edges() {
        let key = if u <= v { (u, v) } else { (v, u) };
        *counts.entry(key).or_insert(0.0) += 1.0;
    }
    let (members, weights): (Vec<_>, Vec<_>) = counts
        .into_iter()
        .map(|((u, v), w)| (vec![u, v], w))
        .unzip();
    hypergraph_from_members("edges", g.n_nodes(), members, Some(weights))
}

/// Builds a hypergraph directly from explicit member lists. Used by the
/// pairwise-edge ablation (one 2-node hyperedge per graph edge) and by tests.
pub fn hypergraph_from_members(
    motif_id: &str,
    n_nodes: usize,
    members: Vec<Vec<NodeId>>,
    weights: Option<Vec<f64>>,
) -> Result<Hypergraph, HypergraphError> {
    if members.is_empty() {
        return Err(HypergraphError::Empty {
            motif: motif_id.to_string(),
        });
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; members.len()]);
    assert_eq!(weights.len(), members.len());
    assert!(weights.iter().all(|&w| w > 0.0), "weights must be positive");
    let mut node_edges: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (e, m) in members.iter().enumerate() {
        assert!(m.len() >= 2, "hyperedge needs at least 2 members");
        for &v in m {
            if v.0 >= n_nodes {
                return Err(HypergraphError::NodeOutOfRange {
                    node: v.0,
                    n_nodes,
                });
            }
            node_edges[v.0].push(e);
        }
    }
    Ok(Hypergraph {
        motif_id: motif_id.to_string(),
        n_nodes,
        members,
        weights,
        node_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn worked_example(weights: Option<Vec<f64>>) -> Hypergraph {
        hypergraph_from_members(
            "X",
            4,
            vec![
                vec![NodeId(0), NodeId(1), NodeId(2)],
                vec![NodeId(1), NodeId(2), NodeId(3)],
            ],
            weights,
        )
        .unwrap()
    }

    #[test]
    fn incidence_of_worked_example() {
        let hg = worked_example(None);
        let h = hg.incidence_dense();
        let expect = [[1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.0, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            assert_eq!(h.row(i), row);
        }
        assert_eq!(hg.edges_of(NodeId(1)), &[0, 1]);
        assert_eq!(hg.edges_of(NodeId(3)), &[1]);
    }

    #[test]
    fn unit_weight_degrees() {
        let hg = worked_example(None);
        assert_eq!(hg.node_degrees(), vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(hg.edge_degrees(), vec![3.0, 3.0]);
    }

    #[test]
    fn weighted_degrees() {
        // By hand from d(v) = sum_e w_e h(v,e) with w = [2, 3].
        let hg = worked_example(Some(vec![2.0, 3.0]));
        assert_eq!(hg.node_degrees(), vec![2.0, 5.0, 5.0, 3.0]);
    }

    #[test]
    fn uncovered_node_has_zero_degree() {
        let hg = hypergraph_from_members("X", 5, vec![vec![NodeId(0), NodeId(1)]], None).unwrap();
        let d = hg.node_degrees();
        assert_eq!(d[2], 0.0);
        assert_eq!(d[3], 0.0);
        assert_eq!(d[4], 0.0);
        assert!(hg.edges_of(NodeId(2)).is_empty());
    }

    #[test]
    fn adjacency_of_worked_example() {
        let a = worked_example(None).adjacency();
        let expect = [
            [1.0, 1.0, 1.0, 0.0],
            [1.0, 2.0, 2.0, 1.0],
            [1.0, 2.0, 2.0, 1.0],
            [0.0, 1.0, 1.0, 1.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            assert_eq!(a.row(i), row);
        }
    }

    #[test]
    fn diagonal_equals_node_degrees() {
        let hg = worked_example(Some(vec![2.5, 0.5]));
        let a = hg.adjacency();
        let d = hg.node_degrees();
        for v in 0..4 {
            assert_eq!(a.get(v, v), d[v]);
        }
    }

    #[test]
    fn empty_instance_set_is_an_error() {
        let err = hypergraph_from_members("APA", 3, vec![], None).unwrap_err();
        assert!(matches!(err, HypergraphError::Empty { .. }));
    }

    fn random_hypergraph(seed: u64, integer_weights: bool) -> Hypergraph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..=30);
        let n_edges = rng.gen_range(1..=12);
        let members: Vec<Vec<NodeId>> = (0..n_edges)
            .map(|_| {
                let arity = rng.gen_range(2..=4.min(n));
                let mut picked = Vec::new();
                while picked.len() < arity {
                    let v = NodeId(rng.gen_range(0..n));
                    if !picked.contains(&v) {
                        picked.push(v);
                    }
                }
                picked
            })
            .collect();
        let weights: Vec<f64> = (0..n_edges)
            .map(|_| {
                if integer_weights {
                    rng.gen_range(1..=5) as f64
                } else {
                    rng.gen_range(0.1..3.0)
                }
            })
            .collect();
        hypergraph_from_members("R", n, members, Some(weights)).unwrap()
    }

    /// Naive oracle: materialize H, compute H diag(w) Ht by triple loop.
    fn dense_adjacency_oracle(hg: &Hypergraph) -> Matrix {
        let n = hg.n_nodes();
        let ne = hg.n_edges();
        let h = hg.incidence_dense();
        let mut a = Matrix::zeros(n, n);
        for u in 0..n {
            for v in 0..n {
                let mut sum = 0.0;
                for e in 0..ne {
                    sum += h.get(u, e) * hg.weights()[e] * h.get(v, e);
                }
                a.set(u, v, sum);
            }
        }
        a
    }

    #[test]
    fn adjacency_matches_dense_oracle_exactly_for_integer_weights() {
        for seed in 0..50 {
            let hg = random_hypergraph(seed, true);
            let a = hg.adjacency();
            let oracle = dense_adjacency_oracle(&hg);
            assert_eq!(a.data(), oracle.data(), "seed {seed}");
        }
    }

    #[test]
    fn adjacency_close_to_oracle_for_real_weights() {
        for seed in 50..80 {
            let hg = random_hypergraph(seed, false);
            let diff = hg.adjacency().max_abs_diff(&dense_adjacency_oracle(&hg));
            assert!(diff < 1e-12, "seed {seed}: diff {diff}");
        }
    }

    #[test]
    fn adjacency_exactly_symmetric() {
        for seed in 0..30 {
            let a = random_hypergraph(seed, false).adjacency();
            for u in 0..a.rows() {
                for v in 0..a.cols() {
                    assert_eq!(a.get(u, v), a.get(v, u));
                }
            }
        }
    }

    #[test]
    fn weighted_handshake_identity() {
        for seed in 0..30 {
            let hg = random_hypergraph(seed, false);
            let lhs: f64 = hg.node_degrees().iter().sum();
            let rhs: f64 = hg
                .edge_degrees()
                .iter()
                .zip(hg.weights())
                .map(|(d, w)| d * w)
                .sum();
            assert!((lhs - rhs).abs() < 1e-9, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pairwise_hypergraph_folds_parallel_edges_into_weights() {
        let mut b = crate::hin::GraphBuilder::new();
        let ta = b.node_type("author", 1);
        let tp = b.node_type("paper", 1);
        let writes = b.edge_type("writes");
        let reviews = b.edge_type("reviews");
        for i in 0..2 {
            let v = b.add_node(&format!("a{i}"), ta).unwrap();
            b.set_features(v, vec![0.0]).unwrap();
        }
        for i in 0..2 {
            let v = b.add_node(&format!("p{i}"), tp).unwrap();
            b.set_features(v, vec![0.0]).unwrap();
            b.set_label(v, 0);
        }
        b.add_edge(NodeId(0), NodeId(2), writes).unwrap();
        b.add_edge(NodeId(2), NodeId(0), reviews).unwrap();
        b.add_edge(NodeId(1), NodeId(3), writes).unwrap();
        let g = b.finish(1, tp).unwrap();

        let hg = pairwise_hypergraph(&g).unwrap();
        assert_eq!(hg.n_edges(), 2);
        assert!(hg.uniform_arity() == Some(2));
        assert_eq!(hg.members(0), &[NodeId(0), NodeId(2)]);
        assert_eq!(hg.members(1), &[NodeId(1), NodeId(3)]);
        assert_eq!(hg.weights(), &[2.0, 1.0]);
    }
}

//! Typed subgraph patterns and instance enumeration.
//!
//! A [`MotifPattern`] is a small connected pattern graph whose roles carry
//! node types and whose edges carry edge types. [`enumerate_instances`] finds
//! every injective, type- and edge-respecting assignment of roles to graph
//! nodes, deduplicated up to pattern automorphism. Instances become the
//! hyperedges of the downstream hypergraph.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use serde::Deserialize;
use thiserror::Error;

use crate::hin::{EdgeTypeId, HeteroGraph, NodeId, NodeTypeId};

pub const MIN_ARITY: usize = 2;
pub const MAX_ARITY: usize = 6;

#[derive(Debug, Error)]
pub enum MotifError {
    #[error("motif json: {0}")]
    BadJson(String),
    #[error("motif \"{id}\": arity {arity} outside [{MIN_ARITY}, {MAX_ARITY}]")]
    ArityOutOfBounds { id: String, arity: usize },
    #[error("motif \"{id}\": duplicate role \"{role}\"")]
    DuplicateRole { id: String, role: String },
    #[error("motif \"{id}\": unknown node type \"{name}\"")]
    UnknownType { id: String, name: String },
    #[error("motif \"{id}\": unknown edge type \"{name}\"")]
    UnknownEdgeType { id: String, name: String },
    #[error("motif \"{id}\": edge references undeclared role \"{role}\"")]
    UnknownRole { id: String, role: String },
    #[error("motif \"{id}\": edge connects role \"{role}\" to itself")]
    SelfEdge { id: String, role: String },
    #[error("motif \"{id}\": duplicate pattern edge")]
    DuplicatePatternEdge { id: String },
    #[error("motif \"{id}\": pattern graph is disconnected")]
    Disconnected { id: String },
}

/// Connected typed pattern graph. Role order is the declaration order of the
/// JSON spec and fixes the assignment order of instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifPattern {
    pub id: String,
    pub role_names: Vec<String>,
    pub role_types: Vec<NodeTypeId>,
    /// Role-index pairs with i < j, sorted, deduplicated.
    pub edges: Vec<(usize, usize, EdgeTypeId)>,
}

impl MotifPattern {
    pub fn arity(&self) -> usize {
        self.role_types.len()
    }

    /// All role permutations that preserve types and the typed edge set.
    /// Brute force over permutations; arity is capped at 6.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let m = self.arity();
        let edge_set: BTreeSet<(usize, usize, EdgeTypeId)> = self.edges.iter().copied().collect();
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..m).collect();
        permute(&mut perm, 0, &mut |p| {
            let types_ok = (0..m).all(|i| self.role_types[p[i]] == self.role_types[i]);
            if !types_ok {
                return;
            }
            let edges_ok = self.edges.iter().all(|&(i, j, t)| {
                let (a, b) = ordered(p[i], p[j]);
                edge_set.contains(&(a, b, t))
            });
            if edges_ok {
                out.push(p.to_vec());
            }
        });
        out
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// One matched assignment: `assignment[r]` is the node bound to role `r`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MotifInstance {
    pub assignment: Vec<NodeId>,
}

impl MotifInstance {
    /// Member nodes in ascending id order.
    pub fn node_set(&self) -> Vec<NodeId> {
        let mut s = self.assignment.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// The instances of one pattern on one graph, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    pub pattern_id: String,
    pub instances: Vec<MotifInstance>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MotifSpec {
    id: String,
    roles: Vec<RoleSpec>,
    edges: Vec<(String, String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoleSpec {
    name: String,
    #[serde(rename = "type")]
    type_name: String,
}

/// Parses a motif spec and resolves its type names against `g`.
///
/// ```json
/// { "id": "APA",
///   "roles": [{"name":"a1","type":"author"},{"name":"p","type":"paper"},
///             {"name":"a2","type":"author"}],
///   "edges": [["a1","p","writes"],["a2","p","writes"]] }
/// ```
pub fn parse_motif(json: &str, g: &HeteroGraph) -> Result<MotifPattern, MotifError> {
    let spec: MotifSpec = serde_json::from_str(json).map_err(|e| MotifError::BadJson(e.to_string()))?;
    let id = spec.id;
    let arity = spec.roles.len();
    if !(MIN_ARITY..=MAX_ARITY).contains(&arity) {
        return Err(MotifError::ArityOutOfBounds { id, arity });
    }
    let mut role_names = Vec::with_capacity(arity);
    let mut role_types = Vec::with_capacity(arity);
    for role in &spec.roles {
        if role_names.contains(&role.name) {
            return Err(MotifError::DuplicateRole {
                id,
                role: role.name.clone(),
            });
        }
        let t = g
            .type_id(&role.type_name)
            .ok_or_else(|| MotifError::UnknownType {
                id: id.clone(),
                name: role.type_name.clone(),
            })?;
        role_names.push(role.name.clone());
        role_types.push(t);
    }
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (r1, r2, ename) in &spec.edges {
        let find = |name: &str| {
            role_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| MotifError::UnknownRole {
                    id: id.clone(),
                    role: name.to_string(),
                })
        };
        let i = find(r1)?;
        let j = find(r2)?;
        if i == j {
            return Err(MotifError::SelfEdge {
                id,
                role: r1.clone(),
            });
        }
        let t = g
            .etype_id(ename)
            .ok_or_else(|| MotifError::UnknownEdgeType {
                id: id.clone(),
                name: ename.clone(),
            })?;
        let (a, b) = ordered(i, j);
        edges.push((a, b, t));
    }
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    if edges.len() != before {
        return Err(MotifError::DuplicatePatternEdge { id });
    }
    let pattern = MotifPattern {
        id,
        role_names,
        role_types,
        edges,
    };
    if !pattern_connected(&pattern) {
        return Err(MotifError::Disconnected { id: pattern.id });
    }
    Ok(pattern)
}

fn pattern_connected(p: &MotifPattern) -> bool {
    let m = p.arity();
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(r) = stack.pop() {
        for &(i, j, _) in &p.edges {
            let next = if i == r {
                j
            } else if j == r {
                i
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Reduces an assignment to the lexicographically smallest image under the
/// pattern's automorphism group. Two assignments matching the same subgraph
/// share this canonical form.
fn canonicalize(assignment: &[NodeId], autos: &[Vec<usize>]) -> Vec<NodeId> {
    let mut best: Option<Vec<NodeId>> = None;
    for p in autos {
        let image: Vec<NodeId> = p.iter().map(|&r| assignment[r]).collect();
        if best.as_ref().map_or(true, |b| image < *b) {
            best = Some(image);
        }
    }
    best.expect("automorphism group contains identity")
}

/// Enumerates every instance of `pattern` on `g`: injective role assignments
/// whose nodes have the required types and whose required edges all exist.
/// Assignments related by a pattern automorphism count once. Output is sorted
/// by canonical assignment, so it is deterministic and stable under re-runs.
///
/// The search backtracks over roles, anchored on the role whose node type is
/// rarest in `g`; subsequent roles are matched through the pattern edges of
/// already-placed roles, so candidates come from neighbor lists rather than
/// the full node set.
pub fn enumerate_instances(g: &HeteroGraph, pattern: &MotifPattern) -> InstanceSet {
    let m = pattern.arity();
    let autos = pattern.automorphisms();
    let mut type_counts = vec![0usize; g.n_types()];
    for v in g.nodes() {
        type_counts[g.node_type(v).0] += 1;
    }

    // Role visit order: rarest-type anchor, then roles with an already-placed
    // pattern neighbor (always possible: the pattern is connected).
    let anchor = (0..m)
        .min_by_key(|&r| (type_counts[pattern.role_types[r].0], r))
        .expect("arity >= 2");
    let mut order = vec![anchor];
    let mut placed = vec![false; m];
    placed[anchor] = true;
    while order.len() < m {
        let next = (0..m)
            .filter(|&r| !placed[r])
            .filter(|&r| {
                pattern
                    .edges
                    .iter()
                    .any(|&(i, j, _)| (i == r && placed[j]) || (j == r && placed[i]))
            })
            .min_by_key(|&r| {
                let placed_nbrs = pattern
                    .edges
                    .iter()
                    .filter(|&&(i, j, _)| (i == r && placed[j]) || (j == r && placed[i]))
                    .count();
                (usize::MAX - placed_nbrs, r)
            })
            .expect("pattern is connected");
        placed[next] = true;
        order.push(next);
    }

    let mut found: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut assignment = vec![NodeId(usize::MAX); m];
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    search(
        g,
        pattern,
        &order,
        0,
        &mut assignment,
        &mut used,
        &autos,
        &mut found,
    );
    InstanceSet {
        pattern_id: pattern.id.clone(),
        instances: found
            .into_iter()
            .map(|assignment| MotifInstance { assignment })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    g: &HeteroGraph,
    pattern: &MotifPattern,
    order: &[usize],
    depth: usize,
    assignment: &mut Vec<NodeId>,
    used: &mut BTreeSet<NodeId>,
    autos: &[Vec<usize>],
    found: &mut BTreeSet<Vec<NodeId>>,
) {
    if depth == order.len() {
        found.insert(canonicalize(assignment, autos));
        return;
    }
    let role = order[depth];
    let want_type = pattern.role_types[role];
    let candidates: Vec<NodeId> = if depth == 0 {
        g.nodes().filter(|&v| g.node_type(v) == want_type).collect()
    } else {
        let (anchor_role, etype) = pattern
            .edges
            .iter()
            .find_map(|&(i, j, t)| {
                if i == role && assignment[j] != NodeId(usize::MAX) {
                    Some((j, t))
                } else if j == role && assignment[i] != NodeId(usize::MAX) {
                    Some((i, t))
                } else {
                    None
                }
            })
            .expect("visit order keeps the frontier connected");
        g.neighbors_via(assignment[anchor_role], etype)
    };
    for v in candidates {
        if g.node_type(v) != want_type || used.contains(&v) {
            continue;
        }
        let edges_ok = pattern.edges.iter().all(|&(i, j, t)| {
            let other = if i == role {
                assignment[j]
            } else if j == role {
                assignment[i]
            } else {
                return true;
            };
            other == NodeId(usize::MAX) || g.has_edge(v, other, t)
        });
        if !edges_ok {
            continue;
        }
        assignment[role] = v;
        used.insert(v);
        search(g, pattern, order, depth + 1, assignment, used, autos, found);
        used.remove(&v);
        assignment[role] = NodeId(usize::MAX);
    }
}

/// Reference enumerator: tries every injective role assignment over the whole
/// node set. Exponential in arity; only for validating [`enumerate_instances`]
/// on small graphs. Kept free of the backtracker's machinery on purpose,
/// including its own automorphism reduction.
pub fn enumerate_by_exhaustion(g: &HeteroGraph, pattern: &MotifPattern) -> InstanceSet {
    let m = pattern.arity();
    let nodes: Vec<NodeId> = g.nodes().collect();
    let mut found: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut stack = vec![Vec::<NodeId>::new()];
    while let Some(partial) = stack.pop() {
        if partial.len() == m {
            let valid = (0..m).all(|r| g.node_type(partial[r]) == pattern.role_types[r])
                && pattern
                    .edges
                    .iter()
                    .all(|&(i, j, t)| g.has_edge(partial[i], partial[j], t));
            if valid {
                // Smallest relabeling of the assignment under any
                // type/edge-preserving role permutation.
                let mut best = partial.clone();
                let mut perm: Vec<usize> = (0..m).collect();
                permute(&mut perm, 0, &mut |p| {
                    let ok = (0..m).all(|i| {
                        pattern.role_types[p[i]] == pattern.role_types[i]
                    }) && pattern.edges.iter().all(|&(i, j, t)| {
                        let (a, b) = ordered(p[i], p[j]);
                        pattern.edges.contains(&(a, b, t))
                    });
                    if ok {
                        let image: Vec<NodeId> = p.iter().map(|&r| partial[r]).collect();
                        if image < best {
                            best = image;
                        }
                    }
                });
                found.insert(best);
            }
            continue;
        }
        for &v in &nodes {
            if !partial.contains(&v) {
                let mut next = partial.clone();
                next.push(v);
                stack.push(next);
            }
        }
    }
    InstanceSet {
        pattern_id: pattern.id.clone(),
        instances: found
            .into_iter()
            .map(|assignment| MotifInstance { assignment })
            .collect(),
    }
}

/// Uniform sample without replacement of at most `max_count` instances,
/// deterministic for a fixed seed. Canonical order is preserved. Identity
/// when the set already fits.
pub fn sample_instances(set: &InstanceSet, max_count: usize, seed: u64) -> InstanceSet {
    assert!(max_count >= 1, "max_count must be positive");
    if set.len() <= max_count {
        return set.clone();
    }
    let n = set.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in 0..max_count {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..max_count].to_vec();
    chosen.sort_unstable();
    InstanceSet {
        pattern_id: set.pattern_id.clone(),
        instances: chosen.into_iter().map(|i| set.instances[i].clone()).collect(),
    }
}

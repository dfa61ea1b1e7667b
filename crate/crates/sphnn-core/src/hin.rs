//! Typed heterogeneous graph: loading, validation, and neighbor queries.
//!
//! Nodes carry a type and a per-type-dimension feature vector; edges are
//! undirected and typed. The on-disk format is a directory of TSV files plus
//! `meta.json` (see [`load_graph`]). String keys exist only at the I/O
//! boundary; everything downstream works with dense [`NodeId`]s.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Dense node index, 0..N-1 across all types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Index into the node-type table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeTypeId(pub usize);

/// Index into the edge-type table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeTypeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum HinError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed row: {detail}")]
    MalformedRow {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path}:{line}: unknown node key \"{key}\"")]
    DanglingEndpoint {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: duplicate node key \"{key}\"")]
    DuplicateNode {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: duplicate edge ({src}, {dst}, {etype})")]
    DuplicateEdge {
        path: String,
        line: usize,
        src: String,
        dst: String,
        etype: String,
    },
    #[error("{path}:{line}: self-loop on \"{key}\"")]
    SelfLoop {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: feature vector for \"{key}\" has {got} entries, type \"{type_name}\" expects {expect}")]
    FeatureDimension {
        path: String,
        line: usize,
        key: String,
        type_name: String,
        got: usize,
        expect: usize,
    },
    #[error("{path}:{line}: label {label} for \"{key}\" outside [0, {q})")]
    LabelOutOfRange {
        path: String,
        line: usize,
        key: String,
        label: i64,
        q: usize,
    },
    #[error("node \"{key}\" has no feature vector")]
    MissingFeatures { key: String },
    #[error("meta.json: {detail}")]
    BadMeta { detail: String },
    #[error("unknown node type \"{name}\"")]
    UnknownType { name: String },
    #[error("unknown edge type \"{name}\"")]
    UnknownEdgeType { name: String },
    #[error("invalid node id {0}")]
    InvalidNode(usize),
}

/// Heterogeneous information network, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    type_names: Vec<String>,
    type_dims: Vec<usize>,
    etype_names: Vec<String>,
    node_keys: Vec<String>,
    node_types: Vec<NodeTypeId>,
    features: Vec<Vec<f64>>,
    edges: Vec<(NodeId, NodeId, EdgeTypeId)>,
    adj: Vec<Vec<(NodeId, EdgeTypeId)>>,
    labels: Vec<Option<usize>>,
    q: usize,
    target_type: NodeTypeId,
}

impl HeteroGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_keys.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_types(&self) -> usize {
        self.type_names.len()
    }

    pub fn n_etypes(&self) -> usize {
        self.etype_names.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn target_type(&self) -> NodeTypeId {
        self.target_type
    }

    pub fn node_type(&self, v: NodeId) -> NodeTypeId {
        self.node_types[v.0]
    }

    pub fn node_key(&self, v: NodeId) -> &str {
        &self.node_keys[v.0]
    }

    pub fn node_features(&self, v: NodeId) -> &[f64] {
        &self.features[v.0]
    }

    pub fn label(&self, v: NodeId) -> Option<usize> {
        self.labels[v.0]
    }

    pub fn type_name(&self, t: NodeTypeId) -> &str {
        &self.type_names[t.0]
    }

    pub fn type_dim(&self, t: NodeTypeId) -> usize {
        self.type_dims[t.0]
    }

    pub fn etype_name(&self, t: EdgeTypeId) -> &str {
        &self.etype_names[t.0]
    }

    pub fn type_id(&self, name: &str) -> Option<NodeTypeId> {
        self.type_names
            .iter()
            .position(|n| n == name)
            .map(NodeTypeId)
    }

    pub fn etype_id(&self, name: &str) -> Option<EdgeTypeId> {
        self.etype_names
            .iter()
            .position(|n| n == name)
            .map(EdgeTypeId)
    }

    /// Canonicalized edge list, sorted; each undirected edge appears once
    /// with src < dst.
    pub fn edges(&self) -> &[(NodeId, NodeId, EdgeTypeId)] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n_nodes()).map(NodeId)
    }

    pub fn nodes_of_type(&self, t: NodeTypeId) -> Vec<NodeId> {
        self.nodes().filter(|&v| self.node_type(v) == t).collect()
    }

    /// Sorted, deduplicated neighbors of `v`, optionally restricted to one
    /// edge type.
    pub fn typed_neighbors(
        &self,
        v: NodeId,
        etype: Option<EdgeTypeId>,
    ) -> Result<Vec<NodeId>, HinError> {
        if v.0 >= self.n_nodes() {
            return Err(HinError::InvalidNode(v.0));
        }
        let mut out: Vec<NodeId> = self.adj[v.0]
            .iter()
            .filter(|(_, et)| etype.map_or(true, |want| *et == want))
            .map(|&(u, _)| u)
            .collect();
        out.dedup();
        Ok(out)
    }

    /// Neighbors of `v` through edges of type `etype`, sorted, without the
    /// validity check (internal hot path for motif matching).
    pub(crate) fn neighbors_via(&self, v: NodeId, etype: EdgeTypeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.adj[v.0]
            .iter()
            .filter(|&&(_, et)| et == etype)
            .map(|&(u, _)| u)
            .collect();
        out.dedup();
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId, etype: EdgeTypeId) -> bool {
        self.adj[u.0].binary_search(&(v, etype)).is_ok()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.0].len()
    }

    /// Labeled nodes of the target type, in id order.
    pub fn labeled_targets(&self) -> Vec<(NodeId, usize)> {
        self.nodes()
            .filter(|&v| self.node_type(v) == self.target_type)
            .filter_map(|v| self.label(v).map(|y| (v, y)))
            .collect()
    }

    pub fn summary(&self) -> GraphSummary {
        let mut type_counts = vec![0usize; self.n_types()];
        for &t in &self.node_types {
            type_counts[t.0] += 1;
        }
        GraphSummary {
            n_nodes: self.n_nodes(),
            n_edges: self.n_edges(),
            q: self.q,
            type_counts: self
                .type_names
                .iter()
                .cloned()
                .zip(type_counts)
                .collect(),
            n_labeled: self.labels.iter().filter(|l| l.is_some()).count(),
        }
    }
}

/// Loader self-report: node/edge totals and per-type counts.
#[derive(Debug, Clone)]
pub struct GraphSummary {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub q: usize,
    pub type_counts: Vec<(String, usize)>,
    pub n_labeled: usize,
}

impl fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} edges={} q={} labeled={}",
            self.n_nodes, self.n_edges, self.q, self.n_labeled
        )?;
        for (name, count) in &self.type_counts {
            write!(f, " {name}={count}")?;
        }
        Ok(())
    }
}

/// Incremental construction with validation at every step. Used by the
/// synthetic generator, fixtures, and the TSV loader.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    type_names: Vec<String>,
    type_dims: Vec<usize>,
    etype_names: Vec<String>,
    node_keys: Vec<String>,
    key_index: HashMap<String, NodeId>,
    node_types: Vec<NodeTypeId>,
    features: Vec<Option<Vec<f64>>>,
    edge_set: std::collections::BTreeSet<(usize, usize, usize)>,
    labels: HashMap<usize, usize>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a node type; returns the existing id if the name is known.
    /// A type may stay empty (no nodes); its projection then sees no input.
    pub fn node_type(&mut self, name: &str, dim: usize) -> NodeTypeId {
        if let Some(i) = self.type_names.iter().position(|n| n == name) {
            return NodeTypeId(i);
        }
        self.type_names.push(name.to_string());
        self.type_dims.push(dim);
        NodeTypeId(self.type_names.len() - 1)
    }

    pub fn edge_type(&mut self, name: &str) -> EdgeTypeId {
        if let Some(i) = self.etype_names.iter().position(|n| n == name) {
            return EdgeTypeId(i);
        }
        self.etype_names.push(name.to_string());
        EdgeTypeId(self.etype_names.len() - 1)
    }

    pub fn add_node(&mut self, key: &str, t: NodeTypeId) -> Result<NodeId, HinError> {
        if self.key_index.contains_key(key) {
            return Err(HinError::DuplicateNode {
                path: String::new(),
                line: 0,
                key: key.to_string(),
            });
        }
        let id = NodeId(self.node_keys.len());
        self.node_keys.push(key.to_string());
        self.key_index.insert(key.to_string(), id);
        self.node_types.push(t);
        self.features.push(None);
        Ok(id)
    }

    pub fn set_features(&mut self, v: NodeId, feats: Vec<f64>) -> Result<(), HinError> {
        let t = self.node_types[v.0];
        let expect = self.type_dims[t.0];
        if feats.len() != expect {
            return Err(HinError::FeatureDimension {
                path: String::new(),
                line: 0,
                key: self.node_keys[v.0].clone(),
                type_name: self.type_names[t.0].clone(),
                got: feats.len(),
                expect,
            });
        }
        self.features[v.0] = Some(feats);
        Ok(())
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, etype: EdgeTypeId) -> Result<(), HinError> {
        if u == v {
            return Err(HinError::SelfLoop {
                path: String::new(),
                line: 0,
                key: self.node_keys[u.0].clone(),
            });
        }
        let (a, b) = if u.0 < v.0 { (u.0, v.0) } else { (v.0, u.0) };
        if !self.edge_set.insert((a, b, etype.0)) {
            return Err(HinError::DuplicateEdge {
                path: String::new(),
                line: 0,
                src: self.node_keys[a].clone(),
                dst: self.node_keys[b].clone(),
                etype: self.etype_names[etype.0].clone(),
            });
        }
        Ok(())
    }

    pub fn set_label(&mut self, v: NodeId, class: usize) {
        self.labels.insert(v.0, class);
    }

    pub fn lookup(&self, key: &str) -> Option<NodeId> {
        self.key_index.get(key).copied()
    }

    pub fn finish(self, q: usize, target_type: NodeTypeId) -> Result<HeteroGraph, HinError> {
        let n = self.node_keys.len();
        let mut features = Vec::with_capacity(n);
        for (i, f) in self.features.into_iter().enumerate() {
            match f {
                Some(f) => features.push(f),
                None => {
                    return Err(HinError::MissingFeatures {
                        key: self.node_keys[i].clone(),
                    })
                }
            }
        }
        let mut labels = vec![None; n];
        for (v, class) in self.labels {
            if class >= q {
                return Err(HinError::LabelOutOfRange {
                    path: String::new(),
                    line: 0,
                    key: self.node_keys[v].clone(),
                    label: class as i64,
                    q,
                });
            }
            labels[v] = Some(class);
        }
        let edges: Vec<(NodeId, NodeId, EdgeTypeId)> = self
            .edge_set
            .iter()
            .map(|&(a, b, t)| (NodeId(a), NodeId(b), EdgeTypeId(t)))
            .collect();
        let mut adj: Vec<Vec<(NodeId, EdgeTypeId)>> = vec![Vec::new(); n];
        for &(a, b, t) in &edges {
            adj[a.0].push((b, t));
            adj[b.0].push((a, t));
        }
        for list in &mut adj {
            list.sort();
        }
        Ok(HeteroGraph {
            type_names: self.type_names,
            type_dims: self.type_dims,
            etype_names: self.etype_names,
            node_keys: self.node_keys,
            node_types: self.node_types,
            features,
            edges,
            adj,
            labels,
            q,
            target_type,
        })
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Meta {
    q: usize,
    target_type: String,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, HinError> {
    let text = std::fs::read_to_string(path).map_err(|source| HinError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect())
}

fn split_tsv<'a>(
    path: &Path,
    line: usize,
    text: &'a str,
    want: usize,
) -> Result<Vec<&'a str>, HinError> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != want {
        return Err(HinError::MalformedRow {
            path: path.display().to_string(),
            line,
            detail: format!("expected {want} tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

fn at(mut err: HinError, path: &Path, line_no: usize) -> HinError {
    let p = path.display().to_string();
    match &mut err {
        HinError::MalformedRow { path, line, .. }
        | HinError::DanglingEndpoint { path, line, .. }
        | HinError::DuplicateNode { path, line, .. }
        | HinError::DuplicateEdge { path, line, .. }
        | HinError::SelfLoop { path, line, .. }
        | HinError::FeatureDimension { path, line, .. }
        | HinError::LabelOutOfRange { path, line, .. } => {
            *path = p;
            *line = line_no;
        }
        _ => {}
    }
    err
}

/// Loads a dataset directory: `nodes.tsv`, `features.tsv`, `edges.tsv`,
/// `labels.tsv`, `meta.json`. Lines starting with `#` are ignored. Node ids
/// are assigned densely in `nodes.tsv` file order; feature dimensions are
/// inferred from the first feature row of each type.
pub fn load_graph(dir: &Path) -> Result<HeteroGraph, HinError> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|source| HinError::Io {
        path: meta_path.display().to_string(),
        source,
    })?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| HinError::BadMeta {
        detail: e.to_string(),
    })?;
    if meta.q == 0 {
        return Err(HinError::BadMeta {
            detail: "q must be positive".to_string(),
        });
    }

    // Pass 1: nodes and their types. Dimensions are unknown until the
    // features pass, so the builder is seeded with placeholder dims.
    let nodes_path = dir.join("nodes.tsv");
    let mut rows = Vec::new();
    let mut type_names: Vec<String> = Vec::new();
    for (line, text) in read_lines(&nodes_path)? {
        let f = split_tsv(&nodes_path, line, &text, 2)?;
        if !type_names.iter().any(|n| n == f[1]) {
            type_names.push(f[1].to_string());
        }
        rows.push((line, f[0].to_string(), f[1].to_string()));
    }

    // Pass 2: features, keyed by node, fixing each type's dimension.
    let feat_path = dir.join("features.tsv");
    let mut feats: HashMap<String, (usize, Vec<f64>)> = HashMap::new();
    for (line, text) in read_lines(&feat_path)? {
        let f = split_tsv(&feat_path, line, &text, 2)?;
        let mut vals = Vec::new();
        for part in f[1].split(',') {
            let v: f64 = part.trim().parse().map_err(|_| HinError::MalformedRow {
                path: feat_path.display().to_string(),
                line,
                detail: format!("bad number \"{part}\""),
            })?;
            if !v.is_finite() {
                return Err(HinError::MalformedRow {
                    path: feat_path.display().to_string(),
                    line,
                    detail: format!("non-finite feature \"{part}\""),
                });
            }
            vals.push(v);
        }
        if feats.insert(f[0].to_string(), (line, vals)).is_some() {
            return Err(HinError::MalformedRow {
                path: feat_path.display().to_string(),
                line,
                detail: format!("duplicate feature row for \"{}\"", f[0]),
            });
        }
    }

    let mut type_dims: HashMap<String, usize> = HashMap::new();
    for (_, key, tname) in &rows {
        if let Some((_, v)) = feats.get(key) {
            type_dims.entry(tname.clone()).or_insert(v.len());
        }
    }

    let mut b = GraphBuilder::new();
    for tname in &type_names {
        let dim = *type_dims.get(tname).unwrap_or(&0);
        b.node_type(tname, dim);
    }
    for (line, key, tname) in &rows {
        let t = b.node_type(tname, 0);
        let v = b.add_node(key, t).map_err(|e| at(e, &nodes_path, *line))?;
        match feats.remove(key) {
            Some((fline, vals)) => b
                .set_features(v, vals)
                .map_err(|e| at(e, &feat_path, fline))?,
            None => {
                return Err(HinError::MissingFeatures { key: key.clone() });
            }
        }
    }
    if let Some((key, (line, _))) = feats.into_iter().next() {
        return Err(HinError::DanglingEndpoint {
            path: feat_path.display().to_string(),
            line,
            key,
        });
    }

    // Pass 3: edges. Input rows may be directed; storage is canonical
    // undirected, and a row repeating a known pair is rejected.
    let edges_path = dir.join("edges.tsv");
    for (line, text) in read_lines(&edges_path)? {
        let f = split_tsv(&edges_path, line, &text, 3)?;
        let u = b.lookup(f[0]).ok_or_else(|| HinError::DanglingEndpoint {
            path: edges_path.display().to_string(),
            line,
            key: f[0].to_string(),
        })?;
        let v = b.lookup(f[1]).ok_or_else(|| HinError::DanglingEndpoint {
            path: edges_path.display().to_string(),
            line,
            key: f[1].to_string(),
        })?;
        let et = b.edge_type(f[2]);
        b.add_edge(u, v, et).map_err(|e| at(e, &edges_path, line))?;
    }

    // Pass 4: labels.
    let labels_path = dir.join("labels.tsv");
    for (line, text) in read_lines(&labels_path)? {
        let f = split_tsv(&labels_path, line, &text, 2)?;
        let v = b.lookup(f[0]).ok_or_else(|| HinError::DanglingEndpoint {
            path: labels_path.display().to_string(),
            line,
            key: f[0].to_string(),
        })?;
        let class: i64 = f[1].trim().parse().map_err(|_| HinError::MalformedRow {
            path: labels_path.display().to_string(),
            line,
            detail: format!("bad class index \"{}\"", f[1]),
        })?;
        if class < 0 || class as usize >= meta.q {
            return Err(HinError::LabelOutOfRange {
                path: labels_path.display().to_string(),
                line,
                key: f[0].to_string(),
                label: class,
                q: meta.q,
            });
        }
        b.set_label(v, class as usize);
    }

    let target = b
        .type_names
        .iter()
        .position(|n| *n == meta.target_type)
        .map(NodeTypeId)
        .ok_or_else(|| HinError::UnknownType {
            name: meta.target_type.clone(),
        })?;
    b.finish(meta.q, target)
}

/// Writes a graph back out in the dataset directory format. Floats use the
/// shortest representation that round-trips, so load(save(g)) == g bitwise.
pub fn save_graph(g: &HeteroGraph, dir: &Path) -> Result<(), HinError> {
    use std::fmt::Write as _;
    let io_err = |path: &Path, source| HinError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut nodes = String::new();
    let mut features = String::new();
    let mut labels = String::new();
    for v in g.nodes() {
        let key = g.node_key(v);
        writeln!(nodes, "{key}\t{}", g.type_name(g.node_type(v))).unwrap();
        let feats: Vec<String> = g.node_features(v).iter().map(|x| x.to_string()).collect();
        writeln!(features, "{key}\t{}", feats.join(",")).unwrap();
        if let Some(y) = g.label(v) {
            writeln!(labels, "{key}\t{y}").unwrap();
        }
    }
    let mut edges = String::new();
    for &(u, v, t) in g.edges() {
        writeln!(
            edges,
            "{}\t{}\t{}",
            g.node_key(u),
            g.node_key(v),
            g.etype_name(t)
        )
        .unwrap();
    }
    let meta = serde_json::to_string_pretty(&Meta {
        q: g.q(),
        target_type: g.type_name(g.target_type()).to_string(),
    })
    .expect("meta serializes");

    for (name, content) in [
        ("nodes.tsv", nodes),
        ("features.tsv", features),
        ("edges.tsv", edges),
        ("labels.tsv", labels),
        ("meta.json", meta),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

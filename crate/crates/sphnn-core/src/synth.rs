//! Seeded synthetic heterogeneous graphs with planted paper classes.
//!
//! Papers carry a noisy one-hot class signal in their features; authors
//! write mostly within their home class and venues publish mostly within
//! theirs, so coauthorship and co-venue motifs both carry class signal that
//! feature-only classification lacks. Scale defaults keep everything small
//! enough for seconds-long training runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::{GraphBuilder, HeteroGraph, HinError, NodeId};
use crate::hypergraph::Hypergraph;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("class {class} cannot get a multi-author paper under this config")]
    Unsatisfiable { class: usize },
    #[error(transparent)]
    Graph(#[from] HinError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub q: usize,
    pub papers_per_class: usize,
    pub authors_per_class: usize,
    pub venues_per_class: usize,
    /// Authorship probability for a paper of the author's home class.
    pub p_in: f64,
    /// Authorship probability across classes. Must stay below `p_in`.
    pub p_out: f64,
    pub d_feat: usize,
    /// Standard deviation of the Gaussian feature noise.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            q: 3,
            papers_per_class: 100,
            authors_per_class: 40,
            venues_per_class: 3,
            p_in: 0.1,
            p_out: 0.01,
            d_feat: 8,
            sigma: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::BadConfig(msg));
        if self.q < 2 {
            return bad(format!("q = {} but classification needs q >= 2", self.q));
        }
        if self.papers_per_class == 0 || self.authors_per_class == 0 || self.venues_per_class == 0
        {
            return bad("per-class counts must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!(
                "probabilities must lie in [0,1], got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if self.p_in <= self.p_out {
            return bad(format!(
                "p_in={} must exceed p_out={}",
                self.p_in, self.p_out
            ));
        }
        if self.d_feat < self.q {
            return bad(format!(
                "d_feat={} too small for a {}-class one-hot signal",
                self.d_feat, self.q
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma={} must be finite and >= 0", self.sigma));
        }
        Ok(())
    }

    pub fn n_papers(&self) -> usize {
        self.q * self.papers_per_class
    }

    pub fn n_authors(&self) -> usize {
        self.q * self.authors_per_class
    }

    pub fn n_venues(&self) -> usize {
        self.q * self.venues_per_class
    }
}

/// Generate the graph. Deterministic given the config (the seed included).
///
/// Authorship is sampled per paper; any class left without a single
/// multi-author paper (and hence without a coauthorship motif instance) has
/// its papers' author sets redrawn, up to a bounded number of attempts.
pub fn generate(cfg: &SynthConfig) -> Result<HeteroGraph, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let np = cfg.n_papers();
    let na = cfg.n_authors();
    let nv = cfg.n_venues();
    let paper_class = |p: usize| p / cfg.papers_per_class;
    let author_home = |a: usize| a / cfg.authors_per_class;

    let draw_paper_authors = |p: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let c = paper_class(p);
        (0..na)
            .filter(|&a| {
                let prob = if author_home(a) == c { cfg.p_in } else { cfg.p_out };
                rng.gen_bool(prob)
            })
            .collect()
    };
    let mut authors_of: Vec<Vec<usize>> = (0..np).map(|p| draw_paper_authors(p, &mut rng)).collect();

    for c in 0..cfg.q {
        let class_papers = || (c * cfg.papers_per_class)..((c + 1) * cfg.papers_per_class);
        let starved = |authors_of: &[Vec<usize>]| class_papers().all(|p| authors_of[p].len() < 2);
        let mut attempts = 0;
        while starved(&authors_of) {
            attempts += 1;
            if attempts > 100 {
                return Err(SynthError::Unsatisfiable { class: c });
            }
            for p in class_papers() {
                authors_of[p] = draw_paper_authors(p, &mut rng);
            }
        }
    }

    let venue_of: Vec<usize> = (0..np)
        .map(|p| {
            let c = paper_class(p);
            if rng.gen_bool(0.9) {
                c * cfg.venues_per_class + rng.gen_range(0..cfg.venues_per_class)
            } else {
                rng.gen_range(0..nv)
            }
        })
        .collect();

    let noise = if cfg.sigma > 0.0 {
        Some(Normal::new(0.0, cfg.sigma).expect("validated sigma"))
    } else {
        None
    };
    let perturb = |base: Vec<f64>, rng: &mut ChaCha8Rng| -> Vec<f64> {
        match noise {
            Some(n) => base.into_iter().map(|v| v + n.sample(rng)).collect(),
            None => base,
        }
    };

    let paper_feats: Vec<Vec<f64>> = (0..np)
        .map(|p| {
            let mut base = vec![0.0; cfg.d_feat];
            base[paper_class(p)] = 1.0;
            perturb(base, &mut rng)
        })
        .collect();
    let mean_of = |papers: &[usize], feats: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; cfg.d_feat];
        if papers.is_empty() {
            return m;
        }
        for &p in papers {
            for (o, &v) in m.iter_mut().zip(&feats[p]) {
                *o += v;
            }
        }
        let inv = 1.0 / papers.len() as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    };
    let mut papers_by_author: Vec<Vec<usize>> = vec![Vec::new(); na];
    for (p, authors) in authors_of.iter().enumerate() {
        for &a in authors {
            papers_by_author[a].push(p);
        }
    }
    let author_feats: Vec<Vec<f64>> = (0..na)
        .map(|a| perturb(mean_of(&papers_by_author[a], &paper_feats), &mut rng))
        .collect();
    let mut papers_by_venue: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (p, &v) in venue_of.iter().enumerate() {
        papers_by_venue[v].push(p);
    }
    let venue_feats: Vec<Vec<f64>> = (0..nv)
        .map(|v| perturb(mean_of(&papers_by_venue[v], &paper_feats), &mut rng))
        .collect();

    let mut b = GraphBuilder::new();
    let t_author = b.node_type("author", cfg.d_feat);
    let t_paper = b.node_type("paper", cfg.d_feat);
    let t_venue = b.node_type("venue", cfg.d_feat);
    let e_writes = b.edge_type("writes");
    let e_published = b.edge_type("published_in");
    for (a, feats) in author_feats.into_iter().enumerate() {
        let v = b.add_node(&format!("a{a}"), t_author)?;
        b.set_features(v, feats)?;
    }
    let paper_base = na;
    for (p, feats) in paper_feats.into_iter().enumerate() {
        let v = b.add_node(&format!("p{p}"), t_paper)?;
        b.set_features(v, feats)?;
        b.set_label(v, paper_class(p));
    }
    let venue_base = na + np;
    for (v, feats) in venue_feats.into_iter().enumerate() {
        let node = b.add_node(&format!("v{v}"), t_venue)?;
        b.set_features(node, feats)?;
    }
    for (p, authors) in authors_of.iter().enumerate() {
        for &a in authors {
            b.add_edge(NodeId(a), NodeId(paper_base + p), e_writes)?;
        }
    }
    for (p, &v) in venue_of.iter().enumerate() {
        b.add_edge(NodeId(paper_base + p), NodeId(venue_base + v), e_published)?;
    }
    Ok(b.finish(cfg.q, t_paper)?)
}

/// Fraction of hyperedges whose labeled members all carry one class, among
/// hyperedges with at least one labeled member. Gauges how much class
/// signal a motif's hyperedges carry.
pub fn labeled_purity(g: &HeteroGraph, hg: &Hypergraph) -> f64 {
    let mut seen = 0usize;
    let mut pure = 0usize;
    for e in 0..hg.n_edges() {
        let mut classes = hg.members(e).iter().filter_map(|&v| g.label(v));
        if let Some(first) = classes.next() {
            seen += 1;
            if classes.all(|c| c == first) {
                pure += 1;
            }
        }
    }
    if seen == 0 {
        return 0.0;
    }
    pure as f64 / seen as f64
}

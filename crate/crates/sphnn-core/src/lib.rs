//! Motif-induced hypergraph convolution networks for heterogeneous graphs.
//!
//! The pipeline turns a typed heterogeneous graph into one hypergraph per
//! motif (each motif instance becomes a hyperedge), runs a hypergraph
//! convolution network with learned per-hyperedge attention and a
//! self-connection weight, fuses the per-motif node representations with a
//! semantic attention layer, and trains the whole stack with hand-derived
//! gradients for semi-supervised node classification.
//!
//! Module map:
//! - [`hin`]: the heterogeneous graph, its on-disk format, and validation.
//! - [`motif`]: typed motif patterns and instance enumeration.
//! - [`hypergraph`]: incidence structure, degrees, clique-expansion adjacency.
//! - [`numeric`]: dense matrix kernel, Adam, finite-difference gradient checks.
//! - [`model`]: forward and backward passes of the network.
//! - [`train`]: stratified splits, the training loop, early stopping.
//! - [`metrics`]: macro/micro F1 and accuracy.
//! - [`synth`]: seeded synthetic graphs with planted classes.
//! - [`checkpoint`]: parameter serialization.

pub mod checkpoint;
pub mod hin;
pub mod hypergraph;
pub mod metrics;
pub mod model;
pub mod motif;
pub mod numeric;
pub mod synth;
pub mod train;

pub use hin::{EdgeTypeId, HeteroGraph, NodeId, NodeTypeId};
pub use hypergraph::Hypergraph;
pub use model::{ModelConfig, ModelParams};
pub use motif::{MotifInstance, MotifPattern};
pub use numeric::Matrix;
pub use train::{SplitMasks, TrainConfig};

//! Semi-supervised node classification with GCN, GCN* and MCGL-UM.
//!
//! GCN and GCN* mix node representations through the normalized adjacency.
//! MCGL-UM walks the graph from labeled roots, gives the root's label to the
//! node it lands on, and trains a plain MLP on those pairs. Around the models
//! sit edge-noise measurement and editing, dataset generators and loaders,
//! and a seeded sweep harness.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod models;
pub mod nn;
pub mod rng;
pub mod svg;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{EdgePartition, Graph, NormalizationMode, NormalizedAdjacency};
pub use tensor::{CsrMatrix, DenseMatrix, Features};

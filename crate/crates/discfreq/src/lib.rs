//! Sublinear-time estimation of k-disc frequency vectors on hyperfinite
//! bounded-degree graphs.
//!
//! The pipeline: a seeded greedy decomposition cuts a bounded-degree graph
//! into connected parts of size at most `rho` ([`partition`]), a rank-based
//! local simulation answers "which part contains v?" without materializing
//! the whole decomposition ([`local_oracle`]), and a sampling estimator
//! assembles an empirical disc-type distribution plus a small summary graph
//! from the parts of uniformly sampled vertices ([`estimator`]).
//!
//! Exact ground-truth oracles (full-graph frequency vectors, brute-force
//! partition verification, cut/bad-vertex accounting) live alongside the
//! sublinear path so every guarantee can be checked at desk scale.

pub mod disc;
pub mod estimator;
pub mod generate;
pub mod graph;
pub mod local_oracle;
pub mod partition;
pub mod rng;

pub use disc::{DiscKey, FrequencyVector, RootedDisc};
pub use graph::{EdgeSet, Graph, GraphError, QueryCounts, VertexId};
pub use partition::{Part, Partition, PartitionParams};

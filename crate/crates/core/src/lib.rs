//! Deterministic approximate shortest-path forests and minimum transshipment
//! on undirected weighted graphs.
//!
//! The pipeline builds, per distance scale, a sparse neighborhood cover with
//! per-cluster boundary potentials; stacks those structures into a factored
//! l1-oblivious routing operator; boosts the routing into certified
//! primal-dual transshipment pairs; and rounds single-source flows into trees
//! via Eulerian orientations. Everything runs on a sequential simulator of
//! the Minor-Aggregation round model so round counts can be reported.

pub mod boosting;
pub mod covers;
pub mod driver;
pub mod euler;
pub mod exact;
pub mod gen;
pub mod graph;
pub mod io;
pub mod minor_agg;
pub mod rounding;
pub mod routing;
pub mod verify;

pub use graph::{
    build_augmented, demand_of_flow, flow_cost, validate_potential, AugmentedGraph, Demand, Edge,
    EdgeId, Flow, GraphError, NodeId, Potential, WeightedGraph,
};
pub use minor_agg::{ModelConfig, RoundLedger};

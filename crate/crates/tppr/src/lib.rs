//! Attack investigation over system provenance graphs.
//!
//! The pipeline ingests audit events into a versioned provenance graph,
//! scores every node with an isolation forest over propagated structural
//! features, compresses the graph to the abnormal nodes, annotates them
//! with adversary techniques and tactics, scores the synthesized edges
//! against pattern trees mined from technique sequences, extracts
//! candidate attack paths by backward traversal, and merges the
//! high-confidence paths into a single attack scenario graph.

pub mod anomaly;
pub mod config;
pub mod error;
pub mod eval;
pub mod pattern;
pub mod pipeline;
pub mod provenance;
pub mod reasoning;
pub mod scoring;
pub mod subgraph;
pub mod ttp;

pub use error::{Error, Result};

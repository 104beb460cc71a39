//! Node anomaly detection: per-node operation-count features, a fixed
//! (parameter-free) neighborhood-mean embedding, and isolation-forest
//! scoring with a contamination-quantile cutoff.

pub mod iforest;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{Op, ProvenanceGraph};

pub use iforest::{Forest, ForestOptions};

/// Feature width: one (in, out) pair of counters per operation.
pub const FEATURE_DIMS: usize = 2 * Op::ALL.len();

/// Embedding propagation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    /// Number of propagation layers; 0 leaves raw features untouched.
    pub layers: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { layers: 2 }
    }
}

/// Detector settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub trees: usize,
    pub subsample: usize,
    /// Fraction of nodes to flag abnormal (quantile cutoff).
    pub contamination: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            trees: 100,
            subsample: 256,
            contamination: 0.05,
            seed: 42,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("trees must be >= 1".into()));
        }
        if self.subsample < 2 {
            return Err(Error::InvalidParameter("subsample must be >= 2".into()));
        }
        if !(self.contamination > 0.0 && self.contamination < 1.0) {
            return Err(Error::InvalidParameter(
                "contamination must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Scoring output: every node's anomaly score plus the abnormal subset at
/// the contamination quantile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub scores: BTreeMap<String, f64>,
    pub abnormal: BTreeSet<String>,
    pub threshold: f64,
    /// Set when score ties forced an arbitrary cut at the quantile.
    pub degenerate: bool,
}

impl AnomalyReport {
    pub fn is_abnormal(&self, id: &str) -> bool {
        self.abnormal.contains(id)
    }
}

/// Per-node feature vectors: `[op0_in, op0_out, op1_in, op1_out, ...]` in
/// the canonical operation order.
pub fn extract_features(g: &ProvenanceGraph) -> BTreeMap<String, Vec<f64>> {
    let mut features = vec![vec![0.0f64; FEATURE_DIMS]; g.node_count()];
    for ev in g.events() {
        let d = 2 * ev.op.index();
        features[ev.dst][d] += 1.0;
        features[ev.src][d + 1] += 1.0;
    }
    features
        .into_iter()
        .enumerate()
        .map(|(i, f)| (g.node(i).id.clone(), f))
        .collect()
}

/// Propagates features for `cfg.layers` rounds: each round replaces a
/// node's vector with the symmetric-normalized mean of its own and its
/// undirected neighbors' previous vectors (self-loop weight 1, neighbor
/// weight = event multiplicity).
pub fn embed(
    features: &BTreeMap<String, Vec<f64>>,
    g: &ProvenanceGraph,
    cfg: &EmbeddingConfig,
) -> BTreeMap<String, Vec<f64>> {
    let n = g.node_count();
    let mut neighbor_weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for ev in g.events() {
        *neighbor_weights[ev.src].entry(ev.dst).or_insert(0.0) += 1.0;
        *neighbor_weights[ev.dst].entry(ev.src).or_insert(0.0) += 1.0;
    }
    let degree: Vec<f64> = neighbor_weights
        .iter()
        .map(|w| 1.0 + w.values().sum::<f64>())
        .collect();

    let mut current: Vec<Vec<f64>> = (0..n)
        .map(|i| features[&g.node(i).id].clone())
        .collect();
    for _ in 0..cfg.layers {
        let mut next = vec![vec![0.0f64; FEATURE_DIMS]; n];
        for u in 0..n {
            let du = degree[u];
            for d in 0..FEATURE_DIMS {
                next[u][d] = current[u][d] / du;
            }
            for (&v, &w) in &neighbor_weights[u] {
                let norm = w / (du * degree[v]).sqrt();
                for d in 0..FEATURE_DIMS {
                    next[u][d] += norm * current[v][d];
                }
            }
        }
        current = next;
    }
    current
        .into_iter()
        .enumerate()
        .map(|(i, f)| (g.node(i).id.clone(), f))
        .collect()
}

/// Scores every embedded node with an isolation forest and flags the top
/// contamination fraction as abnormal. Ties at the cutoff are broken by node
/// id and reported as degenerate.
pub fn score_nodes(
    embeddings: &BTreeMap<String, Vec<f64>>,
    cfg: &DetectorConfig,
) -> Result<AnomalyReport> {
    cfg.validate()?;
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    let ids: Vec<&String> = embeddings.keys().collect();
    let data: Vec<Vec<f64>> = embeddings.values().cloned().collect();
    let forest = Forest::fit(
        &data,
        &ForestOptions {
            trees: cfg.trees,
            subsample: cfg.subsample,
            seed: cfg.seed,
            height_limit: None,
        },
    );
    let scores: Vec<f64> = data.iter().map(|row| forest.score(row)).collect();

    let k = ((cfg.contamination * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then_with(|| ids[a].cmp(ids[b]))
    });
    let threshold = scores[order[k - 1]];
    let at_or_above = scores.iter().filter(|&&s| s >= threshold).count();
    let degenerate = at_or_above != k;
    if degenerate {
        log::warn!(
            "degenerate anomaly quantile: {at_or_above} nodes tie at threshold {threshold}, keeping {k}"
        );
    }
    let abnormal: BTreeSet<String> = order[..k].iter().map(|&i| ids[i].clone()).collect();
    Ok(AnomalyReport {
        scores: ids
            .iter()
            .zip(&scores)
            .map(|(id, &s)| ((*id).clone(), s))
            .collect(),
        abnormal,
        threshold,
        degenerate,
    })
}

/// Convenience pipeline: features -> embedding -> scores.
pub fn detect(
    g: &ProvenanceGraph,
    emb: &EmbeddingConfig,
    det: &DetectorConfig,
) -> Result<AnomalyReport> {
    let features = extract_features(g);
    let embedded = embed(&features, g, emb);
    score_nodes(&embedded, det)
}

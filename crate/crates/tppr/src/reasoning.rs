//! Candidate attack-path extraction by greedy backward traversal over the
//! scored subgraph, path-confidence scoring, and confidence-gated merging
//! of overlapping paths into the final scenario graph.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyReport;
use crate::error::{Error, Result};
use crate::provenance::base_of;
use crate::scoring::EdgeScoreBreakdown;
use crate::subgraph::AnomalySubgraph;
use crate::ttp::{Tactic, TechniqueId, TtpAnnotation};

/// Parameters for path-confidence scoring and retention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceParams {
    /// Length sensitivity: longer paths approach their edge average.
    pub lambda: f64,
    /// Weight of the length-adjusted edge score.
    pub w1: f64,
    /// Weight of the mean node anomaly score.
    pub w2: f64,
    /// Retention threshold; confidences are reported unnormalized, so this
    /// is scale-dependent on the configured weights.
    pub theta: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        ConfidenceParams {
            lambda: 3.0,
            w1: 0.5,
            w2: 0.5,
            theta: 0.3,
        }
    }
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if self.w1 < 0.0 || self.w2 < 0.0 || self.w1 + self.w2 <= 0.0 {
            return Err(Error::InvalidParameter(
                "w1 and w2 must be non-negative and not both zero".into(),
            ));
        }
        Ok(())
    }
}

/// One backward-traced path from an entry node to a leaf, with its
/// confidence decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatePath {
    /// Node ids ordered entry → leaf.
    pub nodes: Vec<String>,
    /// Indexes into the subgraph edge list, aligned with consecutive node
    /// pairs.
    pub edges: Vec<usize>,
    pub edge_avg: f64,
    pub length_score: f64,
    pub node_score: f64,
    pub confidence: f64,
}

/// Mean total score across a path's edges; 0 for a single-node path.
pub fn edge_avg(edge_totals: &[f64]) -> f64 {
    if edge_totals.is_empty() {
        return 0.0;
    }
    edge_totals.iter().sum::<f64>() / edge_totals.len() as f64
}

/// Length-adjusted edge score: (1 − e^(−len/λ)) · edge_avg, with len the
/// edge count. Approaches edge_avg for long paths, 0 for single nodes.
pub fn length_score(edge_count: usize, avg: f64, lambda: f64) -> f64 {
    (1.0 - (-(edge_count as f64) / lambda).exp()) * avg
}

/// Mean anomaly score across a path's nodes.
pub fn node_score(nodes: &[String], report: &AnomalyReport) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let sum: f64 = nodes
        .iter()
        .map(|id| report.scores.get(id).copied().unwrap_or(0.0))
        .sum();
    sum / nodes.len() as f64
}

/// Weighted confidence: w1 · length_score + w2 · node_score.
pub fn confidence(length_score: f64, node_score: f64, params: &ConfidenceParams) -> f64 {
    params.w1 * length_score + params.w2 * node_score
}

/// Builds one candidate path per leaf by walking backward from the leaf,
/// always taking the incoming edge with the highest total score (ties:
/// earlier timestamp, then smaller source id), until a node with no
/// unvisited predecessor — on a DAG, an entry node.
pub fn traverse(
    sg: &AnomalySubgraph,
    scores: &[EdgeScoreBreakdown],
    report: &AnomalyReport,
    params: &ConfidenceParams,
) -> Result<Vec<CandidatePath>> {
    params.validate()?;
    if scores.len() != sg.edge_count() {
        return Err(Error::InvalidParameter(format!(
            "{} edge scores for {} subgraph edges",
            scores.len(),
            sg.edge_count()
        )));
    }
    if sg.node_count() == 0 {
        return Ok(Vec::new());
    }
    let leaves = sg.leaves();
    if leaves.is_empty() {
        return Err(Error::NoLeaves);
    }
    let mut paths = Vec::with_capacity(leaves.len());
    for leaf in leaves {
        let mut visited: HashSet<&str> = HashSet::new();
        visited.insert(leaf);
        let mut rev_nodes: Vec<&str> = vec![leaf];
        let mut rev_edges: Vec<usize> = Vec::new();
        let mut at = leaf;
        loop {
            let best = sg
                .in_edges(at)
                .iter()
                .copied()
                .filter(|&i| !visited.contains(sg.edge(i).src.as_str()))
                .reduce(|a, b| pick_incoming(sg, scores, a, b));
            let Some(idx) = best else { break };
            let src = sg.edge(idx).src.as_str();
            visited.insert(src);
            rev_nodes.push(src);
            rev_edges.push(idx);
            at = src;
        }
        rev_nodes.reverse();
        rev_edges.reverse();
        let totals: Vec<f64> = rev_edges.iter().map(|&i| scores[i].total).collect();
        let nodes: Vec<String> = rev_nodes.into_iter().map(str::to_string).collect();
        let avg = edge_avg(&totals);
        let ls = length_score(rev_edges.len(), avg, params.lambda);
        let ns = node_score(&nodes, report);
        paths.push(CandidatePath {
            nodes,
            edges: rev_edges,
            edge_avg: avg,
            length_score: ls,
            node_score: ns,
            confidence: confidence(ls, ns, params),
        });
    }
    Ok(paths)
}

/// Of two incoming edge indexes, the preferable one: higher total score,
/// then earlier timestamp, then smaller source id.
fn pick_incoming(
    sg: &AnomalySubgraph,
    scores: &[EdgeScoreBreakdown],
    a: usize,
    b: usize,
) -> usize {
    let (ea, eb) = (sg.edge(a), sg.edge(b));
    let key_a = (scores[a].total, std::cmp::Reverse((ea.ts, ea.src.as_str())));
    let key_b = (scores[b].total, std::cmp::Reverse((eb.ts, eb.src.as_str())));
    if key_a.partial_cmp(&key_b).unwrap_or(std::cmp::Ordering::Equal)
        == std::cmp::Ordering::Less
    {
        b
    } else {
        a
    }
}

/// A node of the reconstructed scenario, carrying its labels and anomaly
/// score for explainability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioNode {
    pub id: String,
    pub name: String,
    pub technique: TechniqueId,
    pub tactic: Option<Tactic>,
    pub anomaly_score: f64,
}

/// A scenario edge with its score decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEdge {
    pub src: String,
    pub dst: String,
    pub ts: i64,
    pub pruned: usize,
    pub tactic: f64,
    pub technique: f64,
    pub ni_raw: f64,
    pub ni_norm: f64,
    pub total: f64,
    pub flagged: bool,
}

/// The reconstructed attack scenario: the union of retained overlapping
/// candidate paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGraph {
    pub nodes: Vec<ScenarioNode>,
    pub edges: Vec<ScenarioEdge>,
    pub retained_paths: usize,
    /// True when exactly one path cleared the threshold, so the
    /// shared-node overlap filter could not apply and the lone path was
    /// kept as-is.
    pub degenerate: bool,
}

impl ScenarioGraph {
    pub fn node_ids(&self) -> BTreeSet<String> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn edge_pairs(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| (e.src.clone(), e.dst.clone()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<ScenarioGraph> {
        Ok(serde_json::from_str(text)?)
    }

    /// DOT rendering: nodes labeled `name\nTxxxx/Tactic`, edges labeled
    /// with the total score to three decimals.
    pub fn to_dot(&self) -> String {
        use crate::subgraph::escape_dot;
        let mut out = String::from("digraph scenario {\n  rankdir=LR;\n  node [shape=ellipse];\n");
        for n in &self.nodes {
            let tactic = n.tactic.map_or("unmapped", |t| t.name());
            out.push_str(&format!(
                "  \"{}\" [label=\"{}\\n{}/{}\"];\n",
                escape_dot(&n.id),
                escape_dot(&n.name),
                n.technique.as_str(),
                escape_dot(tactic),
            ));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{:.3}\"];\n",
                escape_dot(&e.src),
                escape_dot(&e.dst),
                e.total,
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Drops paths below the confidence threshold, merges survivors that share
/// nodes (shared identity includes entity versions: `f1` and `f1#v2`
/// overlap), and discards survivors that overlap with no other path. When
/// exactly one path clears the threshold it is kept and the scenario is
/// flagged degenerate.
pub fn filter_and_merge(
    paths: &[CandidatePath],
    sg: &AnomalySubgraph,
    scores: &[EdgeScoreBreakdown],
    annotations: &TtpAnnotation,
    report: &AnomalyReport,
    params: &ConfidenceParams,
) -> ScenarioGraph {
    let survivors: Vec<&CandidatePath> = paths
        .iter()
        .filter(|p| p.confidence >= params.theta)
        .collect();
    if survivors.is_empty() {
        log::warn!("no candidate path reached confidence {}", params.theta);
        return ScenarioGraph::default();
    }

    let (kept, degenerate): (Vec<&CandidatePath>, bool) = if survivors.len() == 1 {
        log::warn!("single path cleared the threshold; keeping it without overlap support");
        (survivors, true)
    } else {
        (merge_groups(&survivors), false)
    };
    if kept.is_empty() {
        log::warn!("all surviving paths were mutually disjoint; empty scenario");
        return ScenarioGraph::default();
    }

    let mut node_ids: BTreeSet<&str> = BTreeSet::new();
    let mut edge_idxs: BTreeSet<usize> = BTreeSet::new();
    for p in &kept {
        node_ids.extend(p.nodes.iter().map(String::as_str));
        edge_idxs.extend(p.edges.iter().copied());
    }
    let nodes: Vec<ScenarioNode> = node_ids
        .iter()
        .map(|&id| {
            let labels = annotations.labels_of(id);
            ScenarioNode {
                id: id.to_string(),
                name: sg.node_name(id).unwrap_or(id).to_string(),
                technique: labels.technique,
                tactic: labels.tactic,
                anomaly_score: report.scores.get(id).copied().unwrap_or(0.0),
            }
        })
        .collect();
    let mut edges: Vec<ScenarioEdge> = edge_idxs
        .iter()
        .map(|&i| {
            let e = sg.edge(i);
            let s = &scores[i];
            ScenarioEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
                ts: e.ts,
                pruned: e.pruned,
                tactic: s.tactic,
                technique: s.technique,
                ni_raw: s.ni_raw,
                ni_norm: s.ni_norm,
                total: s.total,
                flagged: s.flagged,
            }
        })
        .collect();
    edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
    ScenarioGraph {
        nodes,
        edges,
        retained_paths: kept.len(),
        degenerate,
    }
}

/// Union-find grouping of paths by shared (version-linked) nodes; returns
/// members of groups with at least two paths.
fn merge_groups<'a>(survivors: &[&'a CandidatePath]) -> Vec<&'a CandidatePath> {
    let mut parent: Vec<usize> = (0..survivors.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut owner: BTreeMap<String, usize> = BTreeMap::new();
    for (i, p) in survivors.iter().enumerate() {
        for id in &p.nodes {
            let base = base_of(id).to_string();
            match owner.get(&base) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
                None => {
                    owner.insert(base, i);
                }
            }
        }
    }
    let mut group_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..survivors.len() {
        *group_sizes.entry(find(&mut parent, i)).or_insert(0) += 1;
    }
    (0..survivors.len())
        .filter(|&i| group_sizes[&find(&mut parent, i)] >= 2)
        .map(|i| survivors[i])
        .collect()
}

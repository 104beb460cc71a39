//! Anomaly subgraph compression: keeps only abnormal nodes and replaces
//! benign stretches between them with synthesized edges. An edge u -> v is
//! emitted exactly when the original graph has a path from u to v whose
//! interior nodes are all benign; trailing benign branches disappear.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyReport;
use crate::error::{Error, Result};
use crate::provenance::ProvenanceGraph;

/// A synthesized edge of the compressed subgraph. `witness` lists the benign
/// interior nodes of the best surviving original path (fewest interiors,
/// then earliest final-hop timestamp); `ts` is that path's final event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEdge {
    pub src: String,
    pub dst: String,
    pub ts: i64,
    pub pruned: usize,
    pub witness: Vec<String>,
}

/// The compressed subgraph: all abnormal nodes, synthesized edges between
/// them, and the entry set (abnormal nodes with no abnormal ancestor).
#[derive(Debug, Clone, Default)]
pub struct AnomalySubgraph {
    /// Node id -> display name.
    pub nodes: BTreeMap<String, String>,
    /// Sorted by (src, dst); at most one edge per ordered pair.
    pub edges: Vec<SynthEdge>,
    pub entries: BTreeSet<String>,
    out_index: BTreeMap<String, Vec<usize>>,
    in_index: BTreeMap<String, Vec<usize>>,
}

impl AnomalySubgraph {
    /// Builds a subgraph from parts, treating in-degree-0 nodes as entries.
    /// Intended for tests and deserialization; `compress` derives entries
    /// from the original graph instead.
    pub fn from_parts(nodes: BTreeMap<String, String>, mut edges: Vec<SynthEdge>) -> Self {
        edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        let mut sg = AnomalySubgraph {
            nodes,
            edges,
            ..Default::default()
        };
        sg.rebuild_indexes();
        sg.entries = sg
            .nodes
            .keys()
            .filter(|id| sg.in_edges(id).is_empty())
            .cloned()
            .collect();
        sg
    }

    fn rebuild_indexes(&mut self) {
        self.out_index = self.nodes.keys().map(|k| (k.clone(), Vec::new())).collect();
        self.in_index = self.out_index.clone();
        for (i, e) in self.edges.iter().enumerate() {
            self.out_index.get_mut(&e.src).expect("edge src in nodes").push(i);
            self.in_index.get_mut(&e.dst).expect("edge dst in nodes").push(i);
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, idx: usize) -> &SynthEdge {
        &self.edges[idx]
    }

    /// Indices of edges leaving `id` (empty for unknown ids).
    pub fn out_edges(&self, id: &str) -> &[usize] {
        self.out_index.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Indices of edges entering `id` (empty for unknown ids).
    pub fn in_edges(&self, id: &str) -> &[usize] {
        self.in_index.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// (in-degree, out-degree) within the subgraph.
    pub fn degrees(&self, id: &str) -> (usize, usize) {
        (self.in_edges(id).len(), self.out_edges(id).len())
    }

    /// Display name of a node, if present.
    pub fn node_name(&self, id: &str) -> Option<&str> {
        self.nodes.get(id).map(String::as_str)
    }

    /// Node ids with no outgoing edges, sorted.
    pub fn leaves(&self) -> Vec<&str> {
        self.nodes
            .keys()
            .filter(|id| self.out_edges(id).is_empty())
            .map(String::as_str)
            .collect()
    }

    /// Ordered (src, dst) pairs, for compact assertions.
    pub fn edge_pairs(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|e| (e.src.as_str(), e.dst.as_str()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = SubgraphRepr {
            nodes: self
                .nodes
                .iter()
                .map(|(id, name)| NodeRepr {
                    id: id.clone(),
                    name: name.clone(),
                })
                .collect(),
            entries: self.entries.iter().cloned().collect(),
            edges: self.edges.clone(),
        };
        Ok(serde_json::to_string_pretty(&repr)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: SubgraphRepr = serde_json::from_str(text)?;
        let nodes: BTreeMap<String, String> =
            repr.nodes.into_iter().map(|n| (n.id, n.name)).collect();
        let mut sg = AnomalySubgraph::from_parts(nodes, repr.edges);
        if !repr.entries.is_empty() {
            sg.entries = repr.entries.into_iter().collect();
        }
        Ok(sg)
    }

    /// GraphViz rendering with nodes labeled by display name.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph anomaly_subgraph {\n  rankdir=LR;\n");
        for (id, name) in &self.nodes {
            let shape = if self.entries.contains(id) {
                " shape=box"
            } else {
                ""
            };
            out.push_str(&format!(
                "  \"{}\" [label=\"{}\"{shape}];\n",
                escape_dot(id),
                escape_dot(name)
            ));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"pruned={}\"];\n",
                escape_dot(&e.src),
                escape_dot(&e.dst),
                e.pruned
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    id: String,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct SubgraphRepr {
    nodes: Vec<NodeRepr>,
    entries: Vec<String>,
    edges: Vec<SynthEdge>,
}

/// Compresses the provenance graph onto its abnormal nodes. For every
/// abnormal source the search walks forward through benign nodes only,
/// emitting one edge per abnormal node reached; among multiple witnessing
/// paths the one with the fewest pruned interiors wins, ties resolved by
/// earliest final-hop timestamp.
pub fn compress(g: &ProvenanceGraph, report: &AnomalyReport) -> Result<AnomalySubgraph> {
    let mut abnormal_idx: Vec<usize> = Vec::new();
    let mut is_abnormal = vec![false; g.node_count()];
    for id in &report.abnormal {
        match g.index_of(id) {
            Some(idx) => {
                is_abnormal[idx] = true;
                abnormal_idx.push(idx);
            }
            None => log::warn!("abnormal node '{id}' not present in graph; ignored"),
        }
    }
    if abnormal_idx.is_empty() {
        return Err(Error::EmptyAbnormalSet);
    }
    // Sorted by id so edge discovery order never depends on map iteration.
    abnormal_idx.sort_by(|&a, &b| g.node(a).id.cmp(&g.node(b).id));

    let entries = find_entries(g, &is_abnormal);

    let mut edges: Vec<SynthEdge> = Vec::new();
    for &u in &abnormal_idx {
        for (target, (pruned, ts, witness)) in benign_interior_reach(g, u, &is_abnormal) {
            edges.push(SynthEdge {
                src: g.node(u).id.clone(),
                dst: g.node(target).id.clone(),
                ts,
                pruned,
                witness: witness.into_iter().map(|w| g.node(w).id.clone()).collect(),
            });
        }
    }
    edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));

    let nodes: BTreeMap<String, String> = abnormal_idx
        .iter()
        .map(|&i| (g.node(i).id.clone(), g.node(i).name.clone()))
        .collect();
    let mut sg = AnomalySubgraph {
        nodes,
        edges,
        entries: entries
            .into_iter()
            .map(|i| g.node(i).id.clone())
            .collect(),
        ..Default::default()
    };
    sg.rebuild_indexes();
    Ok(sg)
}

/// Abnormal nodes with no abnormal proper ancestor.
fn find_entries(g: &ProvenanceGraph, is_abnormal: &[bool]) -> Vec<usize> {
    let order = g
        .topo_order()
        .expect("provenance graph is acyclic by construction");
    let mut tainted = vec![false; g.node_count()]; // has an abnormal ancestor
    for &v in &order {
        for &e in g.in_events(v) {
            let p = g.event(e).src;
            if is_abnormal[p] || tainted[p] {
                tainted[v] = true;
                break;
            }
        }
    }
    (0..g.node_count())
        .filter(|&v| is_abnormal[v] && !tainted[v])
        .collect()
}

type Reach = BTreeMap<usize, (usize, i64, Vec<usize>)>;

/// Level-synchronized forward search from `u` through benign nodes. Returns
/// every abnormal node reachable through all-benign interiors, with the best
/// witness per target: minimal (pruned count, final-hop ts, witness ids).
fn benign_interior_reach(g: &ProvenanceGraph, u: usize, is_abnormal: &[bool]) -> Reach {
    let mut results: Reach = BTreeMap::new();
    let mut visited: HashSet<usize> = HashSet::new();

    // Arrivals at benign nodes for the next level: node -> (last ts, witness).
    let mut frontier: Vec<(usize, Vec<usize>)> = Vec::new();
    let consider = |results: &mut Reach,
                        target: usize,
                        pruned: usize,
                        ts: i64,
                        witness: &[usize]| {
        let cand = (pruned, ts, witness.to_vec());
        match results.get_mut(&target) {
            Some(best) if *best <= cand => {}
            Some(best) => *best = cand,
            None => {
                results.insert(target, cand);
            }
        }
    };

    // First hops out of u.
    let mut next: BTreeMap<usize, (i64, Vec<usize>)> = BTreeMap::new();
    let mut seen_neighbor: HashSet<usize> = HashSet::new();
    for &e in g.out_events(u) {
        let ev = g.event(e);
        if !seen_neighbor.insert(ev.dst) {
            continue; // adjacency is ts-ordered, first occurrence is earliest
        }
        if is_abnormal[ev.dst] {
            consider(&mut results, ev.dst, 0, ev.ts, &[]);
        } else {
            next.insert(ev.dst, (ev.ts, vec![ev.dst]));
        }
    }
    for (node, (_, witness)) in next {
        visited.insert(node);
        frontier.push((node, witness));
    }

    while !frontier.is_empty() {
        let mut next: BTreeMap<usize, (i64, Vec<usize>)> = BTreeMap::new();
        for (b, witness) in &frontier {
            let mut seen_neighbor: HashSet<usize> = HashSet::new();
            for &e in g.out_events(*b) {
                let ev = g.event(e);
                if !seen_neighbor.insert(ev.dst) {
                    continue;
                }
                if is_abnormal[ev.dst] {
                    consider(&mut results, ev.dst, witness.len(), ev.ts, witness);
                } else if !visited.contains(&ev.dst) {
                    let mut extended = witness.clone();
                    extended.push(ev.dst);
                    let arrival = (ev.ts, extended);
                    match next.get_mut(&ev.dst) {
                        Some(best) if *best <= arrival => {}
                        Some(best) => *best = arrival,
                        None => {
                            next.insert(ev.dst, arrival);
                        }
                    }
                }
            }
        }
        frontier = next
            .into_iter()
            .map(|(node, (_, witness))| {
                visited.insert(node);
                (node, witness)
            })
            .collect();
    }
    results
}

//! Technique sequences mined from threat reports, prefix-merged into a
//! technique pattern tree, plus the tactic pattern tree derived by mapping
//! each sequence through the tactic map and collapsing repeats.

use std::io::BufRead;
use std::sync::OnceLock;

use regex::Regex;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ttp::{Tactic, TacticMap, TechniqueId};

/// An ordered technique sequence with adjacent duplicates collapsed.
pub type TechniqueSequence = Vec<TechniqueId>;

/// Supported pattern-file schema version.
pub const PATTERN_FILE_VERSION: u32 = 1;

/// A prefix-merged tree of label sequences. The root is an unlabeled
/// sentinel; every root-to-node path spells a sequence prefix, and no node
/// has two children with the same label.
#[derive(Debug, Clone)]
pub struct PatternTree<L> {
    nodes: Vec<PtNode<L>>,
}

#[derive(Debug, Clone)]
struct PtNode<L> {
    label: Option<L>,
    children: Vec<usize>,
}

impl<L> Default for PatternTree<L> {
    fn default() -> Self {
        PatternTree {
            nodes: vec![PtNode {
                label: None,
                children: Vec::new(),
            }],
        }
    }
}

impl<L: Clone + PartialEq> PatternTree<L> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total arena size including the sentinel root.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn label(&self, idx: usize) -> Option<&L> {
        self.nodes[idx].label.as_ref()
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.nodes[idx].children
    }

    pub const ROOT: usize = 0;

    /// Inserts a sequence, sharing existing prefixes and appending new
    /// children in insertion order.
    pub fn insert(&mut self, seq: &[L]) {
        let mut at = Self::ROOT;
        for label in seq {
            let found = self.nodes[at]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].label.as_ref() == Some(label));
            at = match found {
                Some(c) => c,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(PtNode {
                        label: Some(label.clone()),
                        children: Vec::new(),
                    });
                    self.nodes[at].children.push(idx);
                    idx
                }
            };
        }
    }

    /// Indices of all nodes carrying `label`.
    pub fn occurrences(&self, label: &L) -> Vec<usize> {
        (1..self.nodes.len())
            .filter(|&i| self.nodes[i].label.as_ref() == Some(label))
            .collect()
    }

    /// Labels of the root's children, in insertion order.
    pub fn root_labels(&self) -> Vec<&L> {
        self.nodes[Self::ROOT]
            .children
            .iter()
            .map(|&c| self.nodes[c].label.as_ref().unwrap())
            .collect()
    }

    /// Number of leaves in the subtree rooted at `idx` (a childless node
    /// counts itself).
    pub fn leaf_count_under(&self, idx: usize) -> usize {
        if self.nodes[idx].children.is_empty() {
            return 1;
        }
        self.nodes[idx]
            .children
            .iter()
            .map(|&c| self.leaf_count_under(c))
            .sum()
    }

    /// Edge distances from `idx` to every descendant carrying `label`.
    pub fn descendant_distances(&self, idx: usize, label: &L) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize)> =
            self.nodes[idx].children.iter().map(|&c| (c, 1)).collect();
        while let Some((n, depth)) = stack.pop() {
            if self.nodes[n].label.as_ref() == Some(label) {
                out.push(depth);
            }
            stack.extend(self.nodes[n].children.iter().map(|&c| (c, depth + 1)));
        }
        out
    }

    /// True when some node labeled `s` has a direct child labeled `t`.
    pub fn has_direct_edge(&self, s: &L, t: &L) -> bool {
        self.occurrences(s).iter().any(|&o| {
            self.nodes[o]
                .children
                .iter()
                .any(|&c| self.nodes[c].label.as_ref() == Some(t))
        })
    }

    /// Every root-to-leaf label path.
    pub fn leaf_paths(&self) -> Vec<Vec<L>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_paths(Self::ROOT, &mut path, &mut out);
        out
    }

    fn collect_paths(&self, idx: usize, path: &mut Vec<L>, out: &mut Vec<Vec<L>>) {
        if let Some(label) = &self.nodes[idx].label {
            path.push(label.clone());
        }
        if self.nodes[idx].children.is_empty() {
            if !path.is_empty() {
                out.push(path.clone());
            }
        } else {
            for &c in &self.nodes[idx].children {
                self.collect_paths(c, path, out);
            }
        }
        if self.nodes[idx].label.is_some() {
            path.pop();
        }
    }
}

impl<L: Clone + PartialEq + Ord> PatternTree<L> {
    /// Nested representation with children sorted by label at every level;
    /// the canonical form used for serialization and comparison.
    pub fn to_canonical_repr(&self) -> Vec<PtNodeRepr<L>> {
        self.repr_of(Self::ROOT)
    }

    fn repr_of(&self, idx: usize) -> Vec<PtNodeRepr<L>> {
        let mut reprs: Vec<PtNodeRepr<L>> = self.nodes[idx]
            .children
            .iter()
            .map(|&c| PtNodeRepr {
                label: self.nodes[c].label.clone().unwrap(),
                children: self.repr_of(c),
            })
            .collect();
        reprs.sort_by(|a, b| a.label.cmp(&b.label));
        reprs
    }

    /// Rebuilds a tree from a nested representation.
    pub fn from_repr(reprs: &[PtNodeRepr<L>]) -> Self {
        let mut tree = PatternTree::new();
        for r in reprs {
            tree.attach(Self::ROOT, r);
        }
        tree
    }

    fn attach(&mut self, parent: usize, repr: &PtNodeRepr<L>) {
        let idx = self.nodes.len();
        self.nodes.push(PtNode {
            label: Some(repr.label.clone()),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(idx);
        for c in &repr.children {
            self.attach(idx, c);
        }
    }
}

/// Serializable pattern-tree node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PtNodeRepr<L> {
    pub label: L,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PtNodeRepr<L>>,
}

/// The mined pattern pair: technique-level tree plus its tactic-level
/// counterpart.
#[derive(Debug, Clone, Default)]
pub struct AttSpt {
    pub technique_pt: PatternTree<TechniqueId>,
    pub tactic_pt: PatternTree<Tactic>,
}

#[derive(Serialize, Deserialize)]
struct AttSptFile {
    version: u32,
    technique_pt: Vec<PtNodeRepr<TechniqueId>>,
    tactic_pt: Vec<PtNodeRepr<Tactic>>,
}

impl AttSpt {
    /// Serializes both trees with canonical (label-sorted) child ordering.
    pub fn to_json(&self) -> Result<String> {
        let file = AttSptFile {
            version: PATTERN_FILE_VERSION,
            technique_pt: self.technique_pt.to_canonical_repr(),
            tactic_pt: self.tactic_pt.to_canonical_repr(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<AttSpt> {
        let file: AttSptFile = serde_json::from_str(text)
            .map_err(|e| Error::MalformedPatternFile(e.to_string()))?;
        if file.version != PATTERN_FILE_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: PATTERN_FILE_VERSION,
            });
        }
        Ok(AttSpt {
            technique_pt: PatternTree::from_repr(&file.technique_pt),
            tactic_pt: PatternTree::from_repr(&file.tactic_pt),
        })
    }

    /// Rebuilds both trees with label-sorted children — the same shape a
    /// serialize/deserialize round-trip produces, so scores computed from a
    /// freshly mined tree and from a reloaded one are bit-identical.
    pub fn canonicalize(&self) -> AttSpt {
        AttSpt {
            technique_pt: PatternTree::from_repr(&self.technique_pt.to_canonical_repr()),
            tactic_pt: PatternTree::from_repr(&self.tactic_pt.to_canonical_repr()),
        }
    }
}

fn technique_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bT\d{4}(?:\.\d{3})?\b").expect("technique regex"))
}

/// Scans one document for technique ids in text order, collapsing adjacent
/// duplicates. Returns an empty sequence when the document mentions none.
pub fn extract_sequence(text: &str) -> TechniqueSequence {
    let mut seq: TechniqueSequence = Vec::new();
    for m in technique_regex().find_iter(text) {
        let Some(id) = TechniqueId::parse(m.as_str()) else {
            continue;
        };
        if seq.last() != Some(&id) {
            seq.push(id);
        }
    }
    seq
}

/// Extracts one sequence per document, dropping documents without ids.
pub fn extract_sequences<'a, I>(docs: I) -> Vec<TechniqueSequence>
where
    I: IntoIterator<Item = &'a str>,
{
    docs.into_iter()
        .map(extract_sequence)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a sequences file: one `T1589->T1566->T1059` chain per line,
/// blank/comment lines skipped.
pub fn parse_sequences<R: BufRead>(reader: R) -> Result<Vec<TechniqueSequence>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut seq: TechniqueSequence = Vec::new();
        for part in trimmed.split("->") {
            let id = TechniqueId::parse(part.trim()).ok_or_else(|| Error::BadTechniqueId {
                line: line_no,
                id: part.trim().to_string(),
            })?;
            if seq.last() != Some(&id) {
                seq.push(id);
            }
        }
        if !seq.is_empty() {
            out.push(seq);
        }
    }
    Ok(out)
}

/// Prefix-merges technique sequences into a tree.
pub fn build_technique_pt(sequences: &[TechniqueSequence]) -> PatternTree<TechniqueId> {
    let mut tree = PatternTree::new();
    for seq in sequences {
        tree.insert(seq);
    }
    tree
}

/// Builds the tactic tree from the same sequences: each one is mapped
/// through the tactic map, consecutive duplicate tactics collapse, and the
/// results are prefix-merged.
pub fn derive_tactic_pt(sequences: &[TechniqueSequence], map: &TacticMap) -> PatternTree<Tactic> {
    let mut tree = PatternTree::new();
    for seq in sequences {
        let tactics = map.tactic_sequence(seq);
        if !tactics.is_empty() {
            tree.insert(&tactics);
        }
    }
    tree
}

/// Builds both trees at once.
pub fn build_attspt(sequences: &[TechniqueSequence], map: &TacticMap) -> AttSpt {
    AttSpt {
        technique_pt: build_technique_pt(sequences),
        tactic_pt: derive_tactic_pt(sequences, map),
    }
}

/// Compiled-in demo sequences: four small campaign chains. They serve as
/// the default mining input when no sequence file is configured and as the
/// technique source for the synthetic generator.
pub fn toy_sequences() -> Vec<TechniqueSequence> {
    [
        "T1589->T1566->T1059->T1140->T1105",
        "T1584->T1190->T1505->T1056->T1071",
        "T1583->T1190->T1090",
        "T1583->T1190->T1059->T1070->T1056->T1087",
    ]
    .iter()
    .map(|line| {
        line.split("->")
            .map(|s| TechniqueId::parse(s).expect("builtin sequence ids are valid"))
            .collect()
    })
    .collect()
}

/// The demo sequences in the text format `parse_sequences` reads.
pub fn toy_sequences_text() -> String {
    toy_sequences()
        .iter()
        .map(|seq| {
            seq.iter()
                .map(TechniqueId::as_str)
                .collect::<Vec<_>>()
                .join("->")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// Uniformly samples a root-to-leaf branch of at least `min_len` labels.
pub fn sample_branch<L: Clone + PartialEq, R: rand::Rng>(
    tree: &PatternTree<L>,
    min_len: usize,
    rng: &mut R,
) -> Result<Vec<L>> {
    let candidates: Vec<Vec<L>> = tree
        .leaf_paths()
        .into_iter()
        .filter(|p| p.len() >= min_len)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoBranchLongEnough(min_len));
    }
    Ok(candidates[rng.gen_range(0..candidates.len())].clone())
}

// Keep the serde bounds explicit so PatternTree<Tactic> and
// PatternTree<TechniqueId> both serialize through the same repr types.
fn _assert_repr_serde<L: Serialize + DeserializeOwned>() {}

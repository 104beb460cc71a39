//! Technique/tactic vocabulary and node annotation: validated technique
//! identifiers, the closed set of fourteen tactics, technique-to-tactic
//! mapping, and the two ways abnormal nodes acquire labels (annotation files
//! and match rules).

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyReport;
use crate::error::{Error, Result};
use crate::provenance::ProvenanceGraph;

/// A validated technique identifier: `T` plus four digits, with an optional
/// three-digit sub-technique suffix (`T1059`, `T1059.001`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TechniqueId(String);

impl TechniqueId {
    /// Sentinel for abnormal nodes without any technique annotation.
    pub const SENTINEL: &'static str = "T0000";

    pub fn parse(s: &str) -> Option<TechniqueId> {
        let bytes = s.as_bytes();
        let valid = match bytes.len() {
            5 => bytes[0] == b'T' && bytes[1..5].iter().all(u8::is_ascii_digit),
            9 => {
                bytes[0] == b'T'
                    && bytes[1..5].iter().all(u8::is_ascii_digit)
                    && bytes[5] == b'.'
                    && bytes[6..9].iter().all(u8::is_ascii_digit)
            }
            _ => false,
        };
        valid.then(|| TechniqueId(s.to_string()))
    }

    pub fn sentinel() -> TechniqueId {
        TechniqueId(Self::SENTINEL.to_string())
    }

    pub fn is_sentinel(&self) -> bool {
        self.0 == Self::SENTINEL
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The closed set of tactics a technique can serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tactic {
    #[serde(rename = "Reconnaissance")]
    Reconnaissance,
    #[serde(rename = "Resource Development")]
    ResourceDevelopment,
    #[serde(rename = "Initial Access")]
    InitialAccess,
    #[serde(rename = "Execution")]
    Execution,
    #[serde(rename = "Persistence")]
    Persistence,
    #[serde(rename = "Privilege Escalation")]
    PrivilegeEscalation,
    #[serde(rename = "Defense Evasion")]
    DefenseEvasion,
    #[serde(rename = "Credential Access")]
    CredentialAccess,
    #[serde(rename = "Discovery")]
    Discovery,
    #[serde(rename = "Lateral Movement")]
    LateralMovement,
    #[serde(rename = "Collection")]
    Collection,
    #[serde(rename = "Command and Control")]
    CommandAndControl,
    #[serde(rename = "Exfiltration")]
    Exfiltration,
    #[serde(rename = "Impact")]
    Impact,
}

impl Tactic {
    pub const ALL: [Tactic; 14] = [
        Tactic::Reconnaissance,
        Tactic::ResourceDevelopment,
        Tactic::InitialAccess,
        Tactic::Execution,
        Tactic::Persistence,
        Tactic::PrivilegeEscalation,
        Tactic::DefenseEvasion,
        Tactic::CredentialAccess,
        Tactic::Discovery,
        Tactic::LateralMovement,
        Tactic::Collection,
        Tactic::CommandAndControl,
        Tactic::Exfiltration,
        Tactic::Impact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tactic::Reconnaissance => "Reconnaissance",
            Tactic::ResourceDevelopment => "Resource Development",
            Tactic::InitialAccess => "Initial Access",
            Tactic::Execution => "Execution",
            Tactic::Persistence => "Persistence",
            Tactic::PrivilegeEscalation => "Privilege Escalation",
            Tactic::DefenseEvasion => "Defense Evasion",
            Tactic::CredentialAccess => "Credential Access",
            Tactic::Discovery => "Discovery",
            Tactic::LateralMovement => "Lateral Movement",
            Tactic::Collection => "Collection",
            Tactic::CommandAndControl => "Command and Control",
            Tactic::Exfiltration => "Exfiltration",
            Tactic::Impact => "Impact",
        }
    }
}

impl fmt::Display for Tactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tactic {
    type Err = ();

    /// Case-insensitive; accepts `&` as a spelling of "and".
    fn from_str(s: &str) -> std::result::Result<Tactic, ()> {
        let normalized = s.trim().replace('&', "and").to_ascii_lowercase();
        let squashed = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
        Tactic::ALL
            .iter()
            .copied()
            .find(|t| t.name().to_ascii_lowercase() == squashed)
            .ok_or(())
    }
}

/// First-occurrence-wins mapping from techniques to tactics.
#[derive(Debug, Clone, Default)]
pub struct TacticMap {
    index: BTreeMap<TechniqueId, Tactic>,
}

/// Built-in technique-to-tactic assignments used when no map file is given.
const DEFAULT_TACTIC_MAP: &str = "\
T1003\tCredential Access
T1005\tCollection
T1018\tDiscovery
T1021\tLateral Movement
T1027\tDefense Evasion
T1041\tExfiltration
T1048\tExfiltration
T1053\tExecution
T1055\tPrivilege Escalation
T1056\tCollection
T1059\tExecution
T1068\tPrivilege Escalation
T1070\tDefense Evasion
T1071\tCommand and Control
T1078\tInitial Access
T1083\tDiscovery
T1087\tDiscovery
T1090\tCommand and Control
T1105\tCommand and Control
T1110\tCredential Access
T1114\tCollection
T1133\tPersistence
T1140\tDefense Evasion
T1189\tInitial Access
T1190\tInitial Access
T1204\tExecution
T1482\tDiscovery
T1486\tImpact
T1489\tImpact
T1505\tPersistence
T1529\tImpact
T1543\tPersistence
T1547\tPersistence
T1555\tCredential Access
T1556\tCredential Access
T1562\tDefense Evasion
T1566\tInitial Access
T1570\tLateral Movement
T1573\tCommand and Control
T1583\tResource Development
T1584\tResource Development
T1587\tResource Development
T1589\tReconnaissance
T1590\tReconnaissance
T1595\tReconnaissance
";

impl TacticMap {
    /// The compiled-in default map.
    pub fn builtin() -> TacticMap {
        TacticMap::from_tsv(DEFAULT_TACTIC_MAP.as_bytes())
            .expect("built-in tactic map must parse")
    }

    /// Parses `technique_id<TAB>tactic_name` lines; blank lines and `#`
    /// comments are skipped; the first occurrence of a technique wins.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<TacticMap> {
        let mut map = TacticMap::default();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let text = line?;
            let trimmed = text.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (tech_str, tactic_str) =
                trimmed.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                    line: line_no,
                    msg: "expected technique_id<TAB>tactic_name".to_string(),
                })?;
            let technique =
                TechniqueId::parse(tech_str.trim()).ok_or_else(|| Error::BadTechniqueId {
                    line: line_no,
                    id: tech_str.trim().to_string(),
                })?;
            let tactic = Tactic::from_str(tactic_str).map_err(|_| Error::BadTactic {
                line: line_no,
                name: tactic_str.trim().to_string(),
            })?;
            map.insert(technique, tactic);
        }
        Ok(map)
    }

    /// Inserts a mapping unless the technique is already mapped.
    pub fn insert(&mut self, technique: TechniqueId, tactic: Tactic) {
        self.index.entry(technique).or_insert(tactic);
    }

    pub fn tactic_of(&self, technique: &TechniqueId) -> Option<Tactic> {
        self.index.get(technique).copied()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Maps a technique sequence to its tactic sequence, collapsing
    /// consecutive duplicates. Sentinel and unmapped techniques are skipped
    /// (unmapped ones with a warning).
    pub fn tactic_sequence(&self, techniques: &[TechniqueId]) -> Vec<Tactic> {
        let mut out: Vec<Tactic> = Vec::new();
        for t in techniques {
            if t.is_sentinel() {
                continue;
            }
            let Some(tactic) = self.tactic_of(t) else {
                log::warn!("technique {t} has no tactic mapping; skipping");
                continue;
            };
            if out.last() != Some(&tactic) {
                out.push(tactic);
            }
        }
        out
    }
}

/// A node's resolved labels. Unannotated abnormal nodes carry the sentinel
/// technique and no tactic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTtp {
    pub technique: TechniqueId,
    pub tactic: Option<Tactic>,
}

/// Technique/tactic labels for every abnormal node.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TtpAnnotation {
    pub nodes: BTreeMap<String, NodeTtp>,
}

impl TtpAnnotation {
    pub fn get(&self, id: &str) -> Option<&NodeTtp> {
        self.nodes.get(id)
    }

    pub fn insert(&mut self, id: String, labels: NodeTtp) {
        self.nodes.insert(id, labels);
    }

    /// Labels for a node, defaulting to the sentinel for unknown ids.
    pub fn labels_of(&self, id: &str) -> NodeTtp {
        self.get(id).cloned().unwrap_or(NodeTtp {
            technique: TechniqueId::sentinel(),
            tactic: None,
        })
    }

    fn fill_missing(&mut self, report: &AnomalyReport) {
        for id in &report.abnormal {
            self.nodes.entry(id.clone()).or_insert(NodeTtp {
                technique: TechniqueId::sentinel(),
                tactic: None,
            });
        }
    }
}

/// Loads `node_id<TAB>technique_id` annotations, restricted to abnormal
/// nodes. Unknown node ids are skipped with a warning; malformed technique
/// ids reject the line. Abnormal nodes without annotations get the sentinel.
pub fn load_annotations<R: BufRead>(
    reader: R,
    report: &AnomalyReport,
    map: &TacticMap,
) -> Result<TtpAnnotation> {
    let mut ann = TtpAnnotation::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (node_id, tech_str) =
            trimmed.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                msg: "expected node_id<TAB>technique_id".to_string(),
            })?;
        let technique =
            TechniqueId::parse(tech_str.trim()).ok_or_else(|| Error::BadTechniqueId {
                line: line_no,
                id: tech_str.trim().to_string(),
            })?;
        let node_id = node_id.trim();
        if !report.scores.contains_key(node_id) {
            log::warn!("line {line_no}: annotation for unknown node '{node_id}' skipped");
            continue;
        }
        if !report.is_abnormal(node_id) {
            log::warn!("line {line_no}: node '{node_id}' is not abnormal; annotation skipped");
            continue;
        }
        let tactic = map.tactic_of(&technique);
        if tactic.is_none() && !technique.is_sentinel() {
            log::warn!("line {line_no}: technique {technique} has no tactic mapping");
        }
        ann.nodes
            .insert(node_id.to_string(), NodeTtp { technique, tactic });
    }
    ann.fill_missing(report);
    Ok(ann)
}

/// What part of a node a rule inspects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleField {
    Id,
    Name,
    Kind,
    Attr(String),
    /// Operation names on incoming edges.
    OpIn,
    /// Operation names on outgoing edges.
    OpOut,
}

impl RuleField {
    fn parse(s: &str) -> Option<RuleField> {
        match s {
            "id" => Some(RuleField::Id),
            "name" => Some(RuleField::Name),
            "kind" => Some(RuleField::Kind),
            "op.in" => Some(RuleField::OpIn),
            "op.out" => Some(RuleField::OpOut),
            other => other.strip_prefix("attr.").map(|k| RuleField::Attr(k.to_string())),
        }
    }
}

/// One annotation rule: nodes whose field matches the pattern get the
/// technique. Rules apply in (priority, file order); the first match wins.
#[derive(Debug, Clone)]
pub struct Rule {
    pub priority: u32,
    pub field: RuleField,
    pub pattern: Regex,
    pub technique: TechniqueId,
}

/// Parses `priority<TAB>field~pattern<TAB>technique_id` rules and sorts them
/// into application order.
pub fn parse_rules<R: BufRead>(reader: R) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let index = i + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::BadRule {
                index,
                msg: "expected priority<TAB>field~pattern<TAB>technique_id".to_string(),
            });
        }
        let priority: u32 = parts[0].trim().parse().map_err(|_| Error::BadRule {
            index,
            msg: format!("bad priority '{}'", parts[0]),
        })?;
        let (field_str, pattern_str) = parts[1].split_once('~').ok_or_else(|| Error::BadRule {
            index,
            msg: "selector must be field~pattern".to_string(),
        })?;
        let field = RuleField::parse(field_str.trim()).ok_or_else(|| Error::BadRule {
            index,
            msg: format!("unknown field '{}'", field_str.trim()),
        })?;
        let pattern = Regex::new(pattern_str).map_err(|e| Error::BadRule {
            index,
            msg: format!("bad pattern: {e}"),
        })?;
        let technique = TechniqueId::parse(parts[2].trim()).ok_or_else(|| Error::BadRule {
            index,
            msg: format!("bad technique id '{}'", parts[2].trim()),
        })?;
        rules.push(Rule {
            priority,
            field,
            pattern,
            technique,
        });
    }
    // Stable sort keeps file order within equal priorities.
    rules.sort_by_key(|r| r.priority);
    Ok(rules)
}

/// Annotates abnormal nodes by matching rules against entity fields and the
/// operations on their edges. Unmatched nodes get the sentinel.
pub fn rule_annotate(
    g: &ProvenanceGraph,
    report: &AnomalyReport,
    rules: &[Rule],
    map: &TacticMap,
) -> TtpAnnotation {
    let mut ann = TtpAnnotation::default();
    for id in &report.abnormal {
        let Some(idx) = g.index_of(id) else {
            log::warn!("abnormal node '{id}' missing from graph; sentinel assigned");
            continue;
        };
        let entity = g.node(idx);
        let matched = rules.iter().find(|rule| match &rule.field {
            RuleField::Id => rule.pattern.is_match(&entity.id),
            RuleField::Name => rule.pattern.is_match(&entity.name),
            RuleField::Kind => rule.pattern.is_match(entity.kind.name()),
            RuleField::Attr(key) => entity
                .attrs
                .get(key)
                .is_some_and(|v| rule.pattern.is_match(v)),
            RuleField::OpIn => g
                .in_events(idx)
                .iter()
                .any(|&e| rule.pattern.is_match(g.event(e).op.name())),
            RuleField::OpOut => g
                .out_events(idx)
                .iter()
                .any(|&e| rule.pattern.is_match(g.event(e).op.name())),
        });
        if let Some(rule) = matched {
            let tactic = map.tactic_of(&rule.technique);
            ann.nodes.insert(
                id.clone(),
                NodeTtp {
                    technique: rule.technique.clone(),
                    tactic,
                },
            );
        }
    }
    ann.fill_missing(report);
    ann
}

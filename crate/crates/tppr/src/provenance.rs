//! System provenance graph: entities (processes, files, sockets) connected by
//! timestamped audit events. Ingestion validates each record against the
//! operation legality table, resolves entities to their current version, and
//! breaks would-be cycles by forking the destination entity into a new
//! version (`#vK` id suffix), so the finished graph is always acyclic.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinds of system entities that can appear in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Process,
    File,
    Socket,
}

impl EntityKind {
    pub fn parse(s: &str) -> Option<EntityKind> {
        match s {
            "Process" | "process" => Some(EntityKind::Process),
            "File" | "file" => Some(EntityKind::File),
            "Socket" | "socket" => Some(EntityKind::Socket),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Process => "Process",
            EntityKind::File => "File",
            EntityKind::Socket => "Socket",
        }
    }

    /// Attribute key that must be present on entities of this kind.
    pub fn required_attr(self) -> &'static str {
        match self {
            EntityKind::Process => "PID",
            EntityKind::File => "Path",
            EntityKind::Socket => "IP",
        }
    }
}

/// The ten audit operations. The subject of every event is a process; the
/// object kind is determined by the operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
    Chmod,
    Start,
    End,
    Execve,
    Clone,
    Sendto,
    Recvfrom,
    Copy,
}

impl Op {
    /// Canonical operation order; fixes the feature-vector layout.
    pub const ALL: [Op; 10] = [
        Op::Read,
        Op::Write,
        Op::Chmod,
        Op::Start,
        Op::End,
        Op::Execve,
        Op::Clone,
        Op::Sendto,
        Op::Recvfrom,
        Op::Copy,
    ];

    pub fn index(self) -> usize {
        Op::ALL.iter().position(|&o| o == self).unwrap()
    }

    pub fn parse(s: &str) -> Option<Op> {
        match s {
            "read" => Some(Op::Read),
            "write" => Some(Op::Write),
            "chmod" => Some(Op::Chmod),
            "start" => Some(Op::Start),
            "end" => Some(Op::End),
            "execve" => Some(Op::Execve),
            "clone" => Some(Op::Clone),
            "sendto" => Some(Op::Sendto),
            "recvfrom" => Some(Op::Recvfrom),
            "copy" => Some(Op::Copy),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Read => "read",
            Op::Write => "write",
            Op::Chmod => "chmod",
            Op::Start => "start",
            Op::End => "end",
            Op::Execve => "execve",
            Op::Clone => "clone",
            Op::Sendto => "sendto",
            Op::Recvfrom => "recvfrom",
            Op::Copy => "copy",
        }
    }

    /// Object kind this operation is legal against (the subject is always a
    /// process).
    pub fn object_kind(self) -> EntityKind {
        match self {
            Op::Read | Op::Write | Op::Chmod => EntityKind::File,
            Op::Start | Op::End | Op::Execve | Op::Clone => EntityKind::Process,
            Op::Sendto | Op::Recvfrom | Op::Copy => EntityKind::Socket,
        }
    }

    /// Whether information flows from the object into the subject. Such
    /// events are drawn object -> subject in the graph; all others are drawn
    /// subject -> object.
    pub fn flows_object_to_subject(self) -> bool {
        matches!(self, Op::Read | Op::Recvfrom)
    }
}

/// One node of the provenance graph. `base_id` and `version` link the
/// versions an entity was forked into; version 0 keeps the raw id, later
/// versions render as `{base_id}#v{version}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub base_id: String,
    pub version: u32,
    pub kind: EntityKind,
    pub name: String,
    pub attrs: BTreeMap<String, String>,
}

/// One edge of the graph. `subject`/`object` are the event roles as
/// recorded; `src`/`dst` are the resolved flow direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Event {
    pub subject: usize,
    pub object: usize,
    pub op: Op,
    pub ts: i64,
    pub src: usize,
    pub dst: usize,
}

/// Wire form of an entity reference inside an event record. Unknown JSON
/// keys are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityDecl {
    pub kind: String,
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

/// Wire form of one audit event record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    pub ts: i64,
    pub op: String,
    pub subject: EntityDecl,
    pub object: EntityDecl,
}

/// Directed acyclic provenance graph over versioned entities.
#[derive(Debug, Clone, Default)]
pub struct ProvenanceGraph {
    nodes: Vec<Entity>,
    events: Vec<Event>,
    id_index: HashMap<String, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl ProvenanceGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn nodes(&self) -> &[Entity] {
        &self.nodes
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn node(&self, idx: usize) -> &Entity {
        &self.nodes[idx]
    }

    pub fn event(&self, idx: usize) -> &Event {
        &self.events[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    /// Event indices leaving `node`, ordered by (ts, insertion order).
    pub fn out_events(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    /// Event indices entering `node`, ordered by (ts, insertion order).
    pub fn in_events(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    /// (in-degree, out-degree) of the node with the given id.
    pub fn degrees(&self, id: &str) -> Result<(usize, usize)> {
        let idx = self
            .index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        Ok((self.in_adj[idx].len(), self.out_adj[idx].len()))
    }

    /// True when the two ids denote versions of the same underlying entity.
    pub fn same_entity(&self, a: &str, b: &str) -> bool {
        base_of(a) == base_of(b)
    }

    /// Topological order of node indices, or None if a cycle exists (which
    /// ingestion rules out).
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for ev in &self.events {
            indeg[ev.dst] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = stack.pop() {
            order.push(u);
            for &e in &self.out_adj[u] {
                let v = self.events[e].dst;
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Serializes the graph as pretty JSON with nodes sorted by id and events
    /// in ingestion order.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct EventOut<'a> {
            ts: i64,
            op: &'a str,
            subject: &'a str,
            object: &'a str,
        }
        #[derive(Serialize)]
        struct GraphOut<'a> {
            nodes: Vec<&'a Entity>,
            events: Vec<EventOut<'a>>,
        }
        let mut nodes: Vec<&Entity> = self.nodes.iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let events = self
            .events
            .iter()
            .map(|ev| EventOut {
                ts: ev.ts,
                op: ev.op.name(),
                subject: &self.nodes[ev.subject].id,
                object: &self.nodes[ev.object].id,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&GraphOut { nodes, events })? + "\n")
    }
}

/// Strips a `#vK` version suffix, if present, yielding the base entity id.
pub fn base_of(id: &str) -> &str {
    if let Some(pos) = id.rfind("#v") {
        if id[pos + 2..].chars().all(|c| c.is_ascii_digit()) && pos + 2 < id.len() {
            return &id[..pos];
        }
    }
    id
}

/// Incremental graph builder used by ingestion.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Entity>,
    events: Vec<Event>,
    id_index: HashMap<String, usize>,
    current: HashMap<String, usize>,
    latest_version: HashMap<String, u32>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and applies one event record. `line` is the 1-based input
    /// position used in error messages.
    pub fn push(&mut self, record: &EventRecord, line: usize) -> Result<()> {
        let op = Op::parse(&record.op).ok_or_else(|| Error::MalformedRecord {
            line,
            msg: format!("unknown op '{}'", record.op),
        })?;
        let subject_kind =
            EntityKind::parse(&record.subject.kind).ok_or_else(|| Error::MalformedRecord {
                line,
                msg: format!("unknown entity kind '{}'", record.subject.kind),
            })?;
        let object_kind =
            EntityKind::parse(&record.object.kind).ok_or_else(|| Error::MalformedRecord {
                line,
                msg: format!("unknown entity kind '{}'", record.object.kind),
            })?;
        if subject_kind != EntityKind::Process || object_kind != op.object_kind() {
            return Err(Error::IllegalTriple {
                line,
                subject_kind: subject_kind.name().to_string(),
                op: op.name().to_string(),
                object_kind: object_kind.name().to_string(),
            });
        }

        let subject = self.resolve(&record.subject, subject_kind, line)?;
        let object = self.resolve(&record.object, object_kind, line)?;

        let (src, mut dst) = if op.flows_object_to_subject() {
            (object, subject)
        } else {
            (subject, object)
        };

        // Version-on-write: if this edge would close a cycle, fork the
        // destination entity into a fresh version and attach the edge there.
        if src == dst || self.reaches(dst, src) {
            dst = self.fork(dst);
        }

        let ev_idx = self.events.len();
        self.events.push(Event {
            subject,
            object,
            op,
            ts: record.ts,
            src,
            dst,
        });
        self.out_adj[src].push(ev_idx);
        self.in_adj[dst].push(ev_idx);
        Ok(())
    }

    fn resolve(&mut self, decl: &EntityDecl, kind: EntityKind, line: usize) -> Result<usize> {
        if decl.id.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                msg: "empty entity id".to_string(),
            });
        }
        if let Some(&idx) = self.current.get(&decl.id) {
            let existing = &self.nodes[idx];
            if existing.kind != kind {
                return Err(Error::MalformedRecord {
                    line,
                    msg: format!(
                        "entity '{}' previously seen as {}, now {}",
                        decl.id,
                        existing.kind.name(),
                        kind.name()
                    ),
                });
            }
            if existing.name != decl.name || existing.attrs != decl.attrs {
                log::warn!(
                    "line {line}: entity '{}' redeclared with different attributes; keeping first",
                    decl.id
                );
            }
            return Ok(idx);
        }
        let required = kind.required_attr();
        if !decl.attrs.contains_key(required) {
            return Err(Error::MalformedRecord {
                line,
                msg: format!(
                    "{} '{}' missing required attribute '{}'",
                    kind.name(),
                    decl.id,
                    required
                ),
            });
        }
        Ok(self.add_node(Entity {
            id: decl.id.clone(),
            base_id: decl.id.clone(),
            version: 0,
            kind,
            name: decl.name.clone(),
            attrs: decl.attrs.clone(),
        }))
    }

    fn add_node(&mut self, entity: Entity) -> usize {
        let idx = self.nodes.len();
        self.id_index.insert(entity.id.clone(), idx);
        self.current.insert(entity.base_id.clone(), idx);
        self.latest_version
            .insert(entity.base_id.clone(), entity.version);
        self.nodes.push(entity);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        self.stamp.push(0);
        idx
    }

    fn fork(&mut self, node: usize) -> usize {
        let base = self.nodes[node].base_id.clone();
        let version = self.latest_version[&base] + 1;
        let prev = &self.nodes[node];
        let forked = Entity {
            id: format!("{base}#v{version}"),
            base_id: base,
            version,
            kind: prev.kind,
            name: prev.name.clone(),
            attrs: prev.attrs.clone(),
        };
        log::debug!("forked '{}' into '{}'", prev.id, forked.id);
        self.add_node(forked)
    }

    /// Depth-first reachability from `from` to `to` over current edges.
    fn reaches(&mut self, from: usize, to: usize) -> bool {
        if self.out_adj[from].is_empty() {
            return false;
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let mut stack = vec![from];
        self.stamp[from] = epoch;
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            for &e in &self.out_adj[u] {
                let v = self.events[e].dst;
                if self.stamp[v] != epoch {
                    self.stamp[v] = epoch;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Finalizes adjacency ordering and returns the finished graph.
    pub fn finish(mut self) -> ProvenanceGraph {
        let events = std::mem::take(&mut self.events);
        for adj in self.out_adj.iter_mut().chain(self.in_adj.iter_mut()) {
            adj.sort_by_key(|&e| (events[e].ts, e));
        }
        ProvenanceGraph {
            nodes: self.nodes,
            events,
            id_index: self.id_index,
            out_adj: self.out_adj,
            in_adj: self.in_adj,
        }
    }
}

/// Ingests newline-delimited JSON event records.
pub fn ingest_jsonl<R: BufRead>(reader: R) -> Result<ProvenanceGraph> {
    let mut builder = GraphBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
                line: line_no,
                msg: e.to_string(),
            })?;
        builder.push(&record, line_no)?;
    }
    Ok(builder.finish())
}

/// Ingests CSV event records with the columns
/// `ts,op,subject_kind,subject_id,subject_name,subject_attrs,object_kind,object_id,object_name,object_attrs`
/// where attrs cells hold `key=value` pairs joined by `;`.
pub fn ingest_csv<R: std::io::Read>(reader: R) -> Result<ProvenanceGraph> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let mut builder = GraphBuilder::new();
    for (i, row) in csv_reader.deserialize::<CsvRow>().enumerate() {
        let line_no = i + 2; // 1-based, after the header line
        let row = row.map_err(|e| Error::MalformedRecord {
            line: line_no,
            msg: e.to_string(),
        })?;
        let record = row.into_record(line_no)?;
        builder.push(&record, line_no)?;
    }
    Ok(builder.finish())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    ts: i64,
    op: String,
    subject_kind: String,
    subject_id: String,
    subject_name: String,
    #[serde(default)]
    subject_attrs: String,
    object_kind: String,
    object_id: String,
    object_name: String,
    #[serde(default)]
    object_attrs: String,
}

impl CsvRow {
    fn into_record(self, line: usize) -> Result<EventRecord> {
        Ok(EventRecord {
            ts: self.ts,
            op: self.op,
            subject: EntityDecl {
                kind: self.subject_kind,
                id: self.subject_id,
                name: self.subject_name,
                attrs: parse_attr_cell(&self.subject_attrs, line)?,
            },
            object: EntityDecl {
                kind: self.object_kind,
                id: self.object_id,
                name: self.object_name,
                attrs: parse_attr_cell(&self.object_attrs, line)?,
            },
        })
    }
}

fn parse_attr_cell(cell: &str, line: usize) -> Result<BTreeMap<String, String>> {
    let mut attrs = BTreeMap::new();
    for pair in cell.split(';').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::MalformedRecord {
            line,
            msg: format!("attribute cell entry '{pair}' is not key=value"),
        })?;
        attrs.insert(k.to_string(), v.to_string());
    }
    Ok(attrs)
}

/// Reads events from a file in the given format ("jsonl" or "csv").
pub fn ingest_path(path: &std::path::Path, format: &str) -> Result<ProvenanceGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::for_file(path, e))?;
    let reader = std::io::BufReader::new(file);
    match format {
        "jsonl" => ingest_jsonl(reader),
        "csv" => ingest_csv(reader),
        other => Err(Error::Config(format!("unknown event format '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decl(kind: &str, id: &str) -> EntityDecl {
        let attr = match kind {
            "Process" => ("PID", "100"),
            "File" => ("Path", "/tmp/x"),
            _ => ("IP", "10.0.0.1"),
        };
        EntityDecl {
            kind: kind.to_string(),
            id: id.to_string(),
            name: id.to_string(),
            attrs: BTreeMap::from([(attr.0.to_string(), attr.1.to_string())]),
        }
    }

    fn rec(ts: i64, op: &str, skind: &str, sid: &str, okind: &str, oid: &str) -> EventRecord {
        EventRecord {
            ts,
            op: op.to_string(),
            subject: decl(skind, sid),
            object: decl(okind, oid),
        }
    }

    fn build(records: &[EventRecord]) -> ProvenanceGraph {
        let mut b = GraphBuilder::new();
        for (i, r) in records.iter().enumerate() {
            b.push(r, i + 1).unwrap();
        }
        b.finish()
    }

    #[test]
    fn single_read_makes_two_nodes_one_edge() {
        let g = build(&[rec(10, "read", "Process", "p1", "File", "f1")]);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.event_count(), 1);
        // A read flows file -> process.
        let ev = g.event(0);
        assert_eq!(g.node(ev.src).id, "f1");
        assert_eq!(g.node(ev.dst).id, "p1");
    }

    #[test]
    fn write_read_write_forks_the_file() {
        let g = build(&[
            rec(1, "write", "Process", "p1", "File", "f1"),
            rec(2, "read", "Process", "p2", "File", "f1"),
            rec(3, "write", "Process", "p2", "File", "f1"),
        ]);
        assert_eq!(g.node_count(), 4, "f1 must split into two versions");
        let f1 = g.index_of("f1").unwrap();
        let f1v1 = g.index_of("f1#v1").unwrap();
        assert_eq!(g.node(f1).version, 0);
        assert_eq!(g.node(f1v1).version, 1);
        assert!(g.same_entity("f1", "f1#v1"));
        assert!(g.topo_order().is_some(), "graph must stay acyclic");
        // The second write lands on the new version.
        assert_eq!(g.degrees("f1#v1").unwrap(), (1, 0));
        assert_eq!(g.degrees("f1").unwrap(), (1, 1));
    }

    #[test]
    fn self_event_forks_destination() {
        let g = build(&[rec(1, "execve", "Process", "p1", "Process", "p1")]);
        assert_eq!(g.node_count(), 2);
        assert!(g.index_of("p1#v1").is_some());
        assert!(g.topo_order().is_some());
    }

    #[test]
    fn illegal_triple_is_rejected_with_names() {
        let mut b = GraphBuilder::new();
        let err = b
            .push(&rec(1, "read", "Process", "p1", "Process", "p2"), 7)
            .unwrap_err();
        match err {
            Error::IllegalTriple {
                line,
                subject_kind,
                op,
                object_kind,
            } => {
                assert_eq!(line, 7);
                assert_eq!(subject_kind, "Process");
                assert_eq!(op, "read");
                assert_eq!(object_kind, "Process");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn subject_must_be_a_process() {
        let mut b = GraphBuilder::new();
        let err = b
            .push(&rec(1, "write", "File", "f1", "File", "f2"), 3)
            .unwrap_err();
        assert!(matches!(err, Error::IllegalTriple { line: 3, .. }));
    }

    #[test]
    fn missing_required_attr_is_malformed() {
        let mut b = GraphBuilder::new();
        let mut r = rec(1, "write", "Process", "p1", "File", "f1");
        r.object.attrs.clear();
        let err = b.push(&r, 11).unwrap_err();
        match err {
            Error::MalformedRecord { line, msg } => {
                assert_eq!(line, 11);
                assert!(msg.contains("Path"), "message should name the attr: {msg}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_entity_keeps_first_attrs() {
        let mut first = rec(1, "write", "Process", "p1", "File", "f1");
        first.subject.attrs.insert("Cmd".into(), "/bin/a".into());
        let mut second = rec(2, "write", "Process", "p1", "File", "f2");
        second.subject.attrs.insert("Cmd".into(), "/bin/b".into());
        let g = build(&[first, second]);
        let p1 = g.index_of("p1").unwrap();
        assert_eq!(g.node(p1).attrs.get("Cmd").unwrap(), "/bin/a");
    }

    #[test]
    fn jsonl_ingest_reports_line_numbers() {
        let input = "\n{not json}\n";
        let err = ingest_jsonl(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn jsonl_ignores_unknown_keys() {
        let input = r#"{"ts": 5, "op": "read", "subject": {"kind": "Process", "id": "p", "name": "p", "attrs": {"PID": "1"}, "extra": 1}, "object": {"kind": "File", "id": "f", "name": "f", "attrs": {"Path": "/f"}}, "junk": true}"#;
        let g = ingest_jsonl(input.as_bytes()).unwrap();
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn csv_round_trip_matches_jsonl() {
        let jsonl = r#"{"ts": 1, "op": "write", "subject": {"kind": "Process", "id": "p", "name": "p", "attrs": {"PID": "1"}}, "object": {"kind": "File", "id": "f", "name": "f", "attrs": {"Path": "/f"}}}"#;
        let csv_text = "ts,op,subject_kind,subject_id,subject_name,subject_attrs,object_kind,object_id,object_name,object_attrs\n\
             1,write,Process,p,p,PID=1,File,f,f,Path=/f\n";
        let a = ingest_jsonl(jsonl.as_bytes()).unwrap();
        let b = ingest_csv(csv_text.as_bytes()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn adjacency_is_ordered_by_timestamp() {
        let g = build(&[
            rec(9, "write", "Process", "p1", "File", "f2"),
            rec(3, "write", "Process", "p1", "File", "f1"),
            rec(5, "clone", "Process", "p1", "Process", "p2"),
        ]);
        let p1 = g.index_of("p1").unwrap();
        let ts: Vec<i64> = g.out_events(p1).iter().map(|&e| g.event(e).ts).collect();
        assert_eq!(ts, vec![3, 5, 9]);
    }

    #[test]
    fn ingestion_is_deterministic() {
        let records: Vec<EventRecord> = (0..40)
            .map(|i| {
                rec(
                    i,
                    if i % 2 == 0 { "write" } else { "read" },
                    "Process",
                    &format!("p{}", i % 5),
                    "File",
                    &format!("f{}", i % 7),
                )
            })
            .collect();
        let a = build(&records).to_json().unwrap();
        let b = build(&records).to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn base_of_strips_only_version_suffixes() {
        assert_eq!(base_of("f1"), "f1");
        assert_eq!(base_of("f1#v3"), "f1");
        assert_eq!(base_of("f1#vx"), "f1#vx");
        assert_eq!(base_of("f1#v"), "f1#v");
    }
}

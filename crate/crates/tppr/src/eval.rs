//! Node-level evaluation against ground truth, and a deterministic
//! synthetic-scenario generator that embeds a technique-labeled attack
//! chain in benign background activity.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{EntityDecl, EventRecord};
use crate::ttp::TechniqueId;

/// The known attack node set (and optionally its edges) for a scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub nodes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(String, String)>>,
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<GroundTruth> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Node-level confusion counts and derived rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fnr: f64,
    /// True when the scenario was empty, making precision undefined; it is
    /// reported as 0 in that case.
    pub empty_scenario: bool,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Compares the scenario's node ids against ground truth.
pub fn metrics(scenario_nodes: &BTreeSet<String>, gt: &GroundTruth) -> Result<MetricsReport> {
    if gt.nodes.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let tp = scenario_nodes.intersection(&gt.nodes).count();
    let fp = scenario_nodes.difference(&gt.nodes).count();
    let fn_ = gt.nodes.difference(scenario_nodes).count();
    let empty_scenario = scenario_nodes.is_empty();
    if empty_scenario {
        log::warn!("empty scenario: precision undefined, reporting 0");
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let fnr = fn_ as f64 / (tp + fn_) as f64;
    Ok(MetricsReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f1,
        fnr,
        empty_scenario,
    })
}

/// Parameters of a generated scenario.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Total attack-chain nodes including the C2 socket; at least 2.
    pub chain_len: usize,
    /// Benign background processes.
    pub benign: usize,
    /// Fraction of benign processes given mildly anomalous behavior.
    pub noise_fraction: f64,
    pub seed: u64,
    /// Technique labels for the chain, one per node; must be at least
    /// `chain_len` long.
    pub techniques: Vec<TechniqueId>,
}

/// Everything the generator emits, as file contents.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub events_jsonl: String,
    pub annotations_tsv: String,
    pub ground_truth: GroundTruth,
}

fn process_decl(id: &str, name: &str, pid: usize) -> EntityDecl {
    EntityDecl {
        kind: "process".into(),
        id: id.into(),
        name: name.into(),
        attrs: BTreeMap::from([("PID".into(), pid.to_string())]),
    }
}

fn file_decl(idx: usize) -> EntityDecl {
    EntityDecl {
        kind: "file".into(),
        id: format!("f{idx}"),
        name: format!("f{idx}"),
        attrs: BTreeMap::from([("Path".into(), format!("/data/f{idx}"))]),
    }
}

fn socket_decl() -> EntityDecl {
    EntityDecl {
        kind: "socket".into(),
        id: "c2".into(),
        name: "c2:443".into(),
        attrs: BTreeMap::from([("IP".into(), "203.0.113.7".into())]),
    }
}

/// Generates a scenario: an execve chain of `chain_len − 1` processes
/// beaconing to one C2 socket, embedded among benign processes doing file
/// reads/writes and occasional clones. A `noise_fraction` of the benign
/// processes additionally performs rare chmod operations so the detector
/// has non-attack anomalies to contend with. Fully deterministic per seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    if spec.chain_len < 2 {
        return Err(Error::InvalidParameter(
            "chain length must be at least 2".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.noise_fraction) {
        return Err(Error::InvalidParameter(
            "noise fraction must lie in [0, 1]".into(),
        ));
    }
    if spec.techniques.len() < spec.chain_len {
        return Err(Error::ChainTooLong {
            chain: spec.chain_len,
            available: spec.techniques.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events: Vec<EventRecord> = Vec::new();
    let mut ts: i64 = 0;
    let push = |events: &mut Vec<EventRecord>, ts: &mut i64, op: &str, subject: EntityDecl, object: EntityDecl| {
        *ts += 1;
        events.push(EventRecord {
            ts: *ts,
            op: op.into(),
            subject,
            object,
        });
    };

    let file_pool = spec.benign * 2 + 4;
    let benign_proc = |i: usize| process_decl(&format!("p{i}"), &format!("worker{i}"), 1000 + i);

    // Which benign processes get noisy behavior: a fixed-size sample.
    let noise_count = (spec.noise_fraction * spec.benign as f64).round() as usize;
    let noisy: BTreeSet<usize> = rand::seq::index::sample(&mut rng, spec.benign.max(1), noise_count.min(spec.benign))
        .into_iter()
        .collect();

    // Benign background: file reads/writes, occasional clones, and chmod
    // bursts on the noisy subset.
    for i in 0..spec.benign {
        if i > 0 && rng.gen_bool(0.3) {
            push(&mut events, &mut ts, "clone", benign_proc(i - 1), benign_proc(i));
        }
        for _ in 0..rng.gen_range(2..=6) {
            let f = rng.gen_range(0..file_pool);
            push(&mut events, &mut ts, "read", benign_proc(i), file_decl(f));
        }
        for _ in 0..rng.gen_range(1..=4) {
            let f = rng.gen_range(0..file_pool);
            push(&mut events, &mut ts, "write", benign_proc(i), file_decl(f));
        }
        if noisy.contains(&i) {
            for _ in 0..rng.gen_range(2..=4) {
                let f = rng.gen_range(0..file_pool);
                push(&mut events, &mut ts, "chmod", benign_proc(i), file_decl(f));
            }
        }
    }

    // Attack chain: chain_len − 1 processes linked by execve, all beaconing
    // to the C2 socket; roughly half also read a benign file.
    let procs = spec.chain_len - 1;
    let attack_proc = |i: usize| process_decl(&format!("a{i}"), &format!("stage{i}"), 9000 + i);
    for i in 0..procs {
        if i + 1 < procs {
            push(&mut events, &mut ts, "execve", attack_proc(i), attack_proc(i + 1));
        }
        if spec.benign > 0 && rng.gen_bool(0.5) {
            let f = rng.gen_range(0..file_pool);
            push(&mut events, &mut ts, "read", attack_proc(i), file_decl(f));
        }
        for _ in 0..rng.gen_range(1..=2) {
            push(&mut events, &mut ts, "sendto", attack_proc(i), socket_decl());
        }
    }

    let mut events_jsonl = String::new();
    for e in &events {
        events_jsonl.push_str(&serde_json::to_string(e)?);
        events_jsonl.push('\n');
    }

    // Chain node ids in causal order, the socket last.
    let mut chain_ids: Vec<String> = (0..procs).map(|i| format!("a{i}")).collect();
    chain_ids.push("c2".into());
    let mut annotations_tsv = String::new();
    for (id, technique) in chain_ids.iter().zip(&spec.techniques) {
        annotations_tsv.push_str(&format!("{id}\t{}\n", technique.as_str()));
    }

    let mut gt_edges: Vec<(String, String)> = Vec::new();
    for w in chain_ids.windows(2) {
        gt_edges.push((w[0].clone(), w[1].clone()));
    }
    let ground_truth = GroundTruth {
        nodes: chain_ids.into_iter().collect(),
        edges: Some(gt_edges),
    };

    Ok(SynthOutput {
        events_jsonl,
        annotations_tsv,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::toy_sequences;
    use crate::provenance::ingest_jsonl;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn gt(ids: &[&str]) -> GroundTruth {
        GroundTruth {
            nodes: set(ids),
            edges: None,
        }
    }

    #[test]
    fn worked_confusion_counts_give_expected_rates() {
        // 16 true positives, 3 false positives, no misses.
        let mut scenario = BTreeSet::new();
        let mut truth = BTreeSet::new();
        for i in 0..16 {
            scenario.insert(format!("t{i}"));
            truth.insert(format!("t{i}"));
        }
        for i in 0..3 {
            scenario.insert(format!("x{i}"));
        }
        let m = metrics(
            &scenario,
            &GroundTruth {
                nodes: truth,
                edges: None,
            },
        )
        .unwrap();
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (16, 3, 0));
        assert_eq!(format!("{:.2}", m.precision * 100.0), "84.21");
        assert_eq!(format!("{:.2}", m.recall * 100.0), "100.00");
        assert_eq!(format!("{:.2}", m.f1 * 100.0), "91.43");
        assert_eq!(m.fnr, 0.0);
    }

    #[test]
    fn identical_sets_score_perfectly() {
        let m = metrics(&set(&["a", "b"]), &gt(&["a", "b"])).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.fnr), (1.0, 1.0, 1.0, 0.0));
        assert!(!m.empty_scenario);
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let m = metrics(&set(&["a"]), &gt(&["b"])).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.fnr, 1.0);
    }

    #[test]
    fn empty_scenario_is_flagged_not_fatal() {
        let m = metrics(&BTreeSet::new(), &gt(&["a"])).unwrap();
        assert!(m.empty_scenario);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        assert!(matches!(
            metrics(&set(&["a"]), &gt(&[])),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn rate_identities_hold_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let scenario: BTreeSet<String> = (0..rng.gen_range(0..30))
                .map(|_| format!("n{}", rng.gen_range(0..40)))
                .collect();
            let truth: BTreeSet<String> = (1..=rng.gen_range(1..30))
                .map(|_| format!("n{}", rng.gen_range(0..40)))
                .collect();
            let m = metrics(
                &scenario,
                &GroundTruth {
                    nodes: truth,
                    edges: None,
                },
            )
            .unwrap();
            assert!((m.fnr - (1.0 - m.recall)).abs() < 1e-12);
            if m.precision + m.recall > 0.0 {
                let f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                assert!((m.f1 - f1).abs() < 1e-12);
            } else {
                assert_eq!(m.f1, 0.0);
            }
        }
    }

    fn toy_techniques() -> Vec<TechniqueId> {
        toy_sequences()
            .into_iter()
            .max_by_key(Vec::len)
            .unwrap()
    }

    #[test]
    fn minimal_chain_without_background_has_exactly_two_nodes() {
        let out = generate(&SynthSpec {
            chain_len: 2,
            benign: 0,
            noise_fraction: 0.0,
            seed: 1,
            techniques: toy_techniques(),
        })
        .unwrap();
        let g = ingest_jsonl(std::io::Cursor::new(&out.events_jsonl)).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(out.ground_truth.nodes, set(&["a0", "c2"]));
    }

    #[test]
    fn generation_is_byte_deterministic_per_seed() {
        let spec = SynthSpec {
            chain_len: 5,
            benign: 40,
            noise_fraction: 0.1,
            seed: 7,
            techniques: toy_techniques(),
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.events_jsonl, b.events_jsonl);
        assert_eq!(a.annotations_tsv, b.annotations_tsv);
        assert_eq!(a.ground_truth.to_json().unwrap(), b.ground_truth.to_json().unwrap());
        let c = generate(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.events_jsonl, c.events_jsonl);
    }

    #[test]
    fn ground_truth_nodes_all_appear_in_the_event_stream() {
        let out = generate(&SynthSpec {
            chain_len: 6,
            benign: 50,
            noise_fraction: 0.05,
            seed: 3,
            techniques: toy_techniques(),
        })
        .unwrap();
        let g = ingest_jsonl(std::io::Cursor::new(&out.events_jsonl)).unwrap();
        for id in &out.ground_truth.nodes {
            assert!(g.index_of(id).is_some(), "gt node {id} missing from graph");
        }
        // Every annotated node is a ground-truth node.
        for line in out.annotations_tsv.lines() {
            let id = line.split('\t').next().unwrap();
            assert!(out.ground_truth.nodes.contains(id));
        }
        // The chain edges connect consecutive ids.
        let edges = out.ground_truth.edges.as_ref().unwrap();
        assert_eq!(edges.len(), 5);
        assert_eq!(edges[0], ("a0".to_string(), "a1".to_string()));
        assert_eq!(edges[4], ("a4".to_string(), "c2".to_string()));
    }

    #[test]
    fn chain_longer_than_technique_sequence_is_rejected() {
        let err = generate(&SynthSpec {
            chain_len: 40,
            benign: 0,
            noise_fraction: 0.0,
            seed: 1,
            techniques: toy_techniques(),
        });
        assert!(matches!(err, Err(Error::ChainTooLong { chain: 40, .. })));
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let base = SynthSpec {
            chain_len: 1,
            benign: 0,
            noise_fraction: 0.0,
            seed: 1,
            techniques: toy_techniques(),
        };
        assert!(generate(&base).is_err());
        assert!(generate(&SynthSpec {
            chain_len: 2,
            noise_fraction: 1.5,
            ..base
        })
        .is_err());
    }

    #[test]
    fn ground_truth_round_trips_through_json() {
        let g = GroundTruth {
            nodes: set(&["a", "b"]),
            edges: Some(vec![("a".into(), "b".into())]),
        };
        let back = GroundTruth::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back.nodes, g.nodes);
        assert_eq!(back.edges, g.edges);
    }
}

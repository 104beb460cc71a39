//! Pipeline stages shared by the individual CLI subcommands and `run`.
//! Every stage is a function over in-memory values plus artifact
//! (de)serializers, so chaining stages in one process and chaining them
//! through files on disk produce byte-identical outputs. Artifacts are
//! written to a `.partial` file first and renamed into place on success.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anomaly::{detect, AnomalyReport};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{metrics, GroundTruth, MetricsReport};
use crate::pattern::{build_attspt, parse_sequences, toy_sequences, AttSpt};
use crate::provenance::{ingest_path, ProvenanceGraph};
use crate::reasoning::{filter_and_merge, traverse, ScenarioGraph};
use crate::scoring::{score_edges, EdgeScoreBreakdown};
use crate::subgraph::{compress, AnomalySubgraph};
use crate::ttp::{load_annotations, parse_rules, rule_annotate, TacticMap, TtpAnnotation};

pub const GRAPH_FILE: &str = "graph.json";
pub const ANOMALY_FILE: &str = "anomaly.json";
pub const TTP_FILE: &str = "ttp.json";
pub const SUBGRAPH_FILE: &str = "subgraph.json";
pub const ATTSPT_FILE: &str = "attspt.json";
pub const SCORES_FILE: &str = "scores.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const SCENARIO_DOT_FILE: &str = "scenario.dot";
pub const METRICS_FILE: &str = "metrics.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.tsv";
pub const GROUND_TRUTH_FILE: &str = "gt.json";
pub const SEQUENCES_FILE: &str = "sequences.txt";

/// On-disk form of the edge-score list, aligned with the subgraph's edge
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoresFile {
    pub edges: Vec<EdgeScoreBreakdown>,
}

/// Writes an artifact atomically: content goes to `<name>.partial`, which
/// is renamed over the final name only after the write completes. A failed
/// run leaves the `.partial` file for inspection, never a truncated
/// artifact.
pub fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::for_file(dir, e))?;
    let partial = dir.join(format!("{name}.partial"));
    let target = dir.join(name);
    std::fs::write(&partial, content).map_err(|e| Error::for_file(&partial, e))?;
    std::fs::rename(&partial, &target).map_err(|e| Error::for_file(&target, e))?;
    Ok(target)
}

pub fn read_artifact(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::for_file(path, e))
}

fn timed<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    log::info!("stage {stage}: {:.1?}", start.elapsed());
    Ok(out)
}

/// Ingest stage: parse the configured event file into a provenance graph.
pub fn ingest_stage(cfg: &PipelineConfig) -> Result<ProvenanceGraph> {
    timed("ingest", || {
        let events = cfg.events.as_deref().ok_or_else(|| {
            Error::Config("no event file: set 'events' in the config or pass --events".into())
        })?;
        let g = ingest_path(events, &cfg.format)?;
        log::info!(
            "ingested {} nodes, {} events",
            g.node_count(),
            g.event_count()
        );
        Ok(g)
    })
}

/// Detection stage: feature extraction, embedding, isolation-forest
/// scoring, quantile cut.
pub fn detect_stage(g: &ProvenanceGraph, cfg: &PipelineConfig) -> Result<AnomalyReport> {
    timed("detect", || {
        let report = detect(g, &cfg.embedding(), &cfg.detector())?;
        log::info!(
            "{} of {} nodes abnormal (threshold {:.4})",
            report.abnormal.len(),
            g.node_count(),
            report.threshold
        );
        Ok(report)
    })
}

/// Annotation stage: explicit annotations file if configured, else rules,
/// else the placeholder technique on every abnormal node.
pub fn annotate_stage(
    g: &ProvenanceGraph,
    report: &AnomalyReport,
    cfg: &PipelineConfig,
) -> Result<TtpAnnotation> {
    timed("annotate", || {
        let map = TacticMap::builtin();
        if let Some(path) = &cfg.annotations {
            let text = read_artifact(path)?;
            return load_annotations(text.as_bytes(), report, &map);
        }
        if let Some(path) = &cfg.rules {
            let text = read_artifact(path)?;
            let rules = parse_rules(text.as_bytes())?;
            return Ok(rule_annotate(g, report, &rules, &map));
        }
        log::info!("no annotations or rules configured; abnormal nodes get the placeholder");
        load_annotations(&[][..], report, &map)
    })
}

/// Compression stage: abnormal nodes plus synthesized edges.
pub fn compress_stage(g: &ProvenanceGraph, report: &AnomalyReport) -> Result<AnomalySubgraph> {
    timed("compress", || {
        let sg = compress(g, report)?;
        log::info!(
            "subgraph: {} nodes, {} edges, {} entry points",
            sg.node_count(),
            sg.edge_count(),
            sg.entries.len()
        );
        Ok(sg)
    })
}

/// Pattern-mining stage: a sequences file if configured, else every file in
/// the reports directory (scanned for technique ids), else the compiled-in
/// demo sequences. The returned trees are in canonical child order.
pub fn patterns_stage(cfg: &PipelineConfig) -> Result<AttSpt> {
    timed("mine-patterns", || {
        let sequences = if let Some(path) = &cfg.sequences {
            parse_sequences(read_artifact(path)?.as_bytes())?
        } else if let Some(dir) = &cfg.reports_dir {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::for_file(dir, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            let mut docs = Vec::new();
            for p in &paths {
                docs.push(read_artifact(p)?);
            }
            crate::pattern::extract_sequences(docs.iter().map(String::as_str))
        } else {
            log::info!("no sequence source configured; using the built-in demo sequences");
            toy_sequences()
        };
        log::info!("mining {} technique sequences", sequences.len());
        Ok(build_attspt(&sequences, &TacticMap::builtin()).canonicalize())
    })
}

/// Edge-scoring stage.
pub fn score_stage(
    sg: &AnomalySubgraph,
    annotations: &TtpAnnotation,
    attspt: &AttSpt,
    cfg: &PipelineConfig,
) -> Result<Vec<EdgeScoreBreakdown>> {
    timed("score", || score_edges(sg, annotations, attspt, &cfg.scoring()))
}

/// Reasoning stage: traversal, confidence filtering, merge.
pub fn reason_stage(
    sg: &AnomalySubgraph,
    scores: &[EdgeScoreBreakdown],
    annotations: &TtpAnnotation,
    report: &AnomalyReport,
    cfg: &PipelineConfig,
) -> Result<ScenarioGraph> {
    timed("reason", || {
        let params = cfg.confidence();
        let paths = traverse(sg, scores, report, &params)?;
        log::info!("{} candidate paths", paths.len());
        let scenario = filter_and_merge(&paths, sg, scores, annotations, report, &params);
        log::info!(
            "scenario: {} nodes, {} edges from {} retained paths",
            scenario.nodes.len(),
            scenario.edges.len(),
            scenario.retained_paths
        );
        Ok(scenario)
    })
}

/// Evaluation stage: node-level metrics against ground truth.
pub fn evaluate_stage(scenario: &ScenarioGraph, gt: &GroundTruth) -> Result<MetricsReport> {
    timed("evaluate", || {
        let m = metrics(&scenario.node_ids(), gt)?;
        log::info!(
            "precision {:.4}, recall {:.4}, f1 {:.4}",
            m.precision,
            m.recall,
            m.f1
        );
        Ok(m)
    })
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs every stage in sequence, writing each artifact as its stage
/// completes. With a `ground_truth` configured, metrics are written too.
pub fn run_all(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();

    let g = ingest_stage(cfg)?;
    write_artifact(&dir, GRAPH_FILE, &g.to_json()?)?;

    let report = detect_stage(&g, cfg)?;
    write_artifact(&dir, ANOMALY_FILE, &pretty(&report)?)?;

    let annotations = annotate_stage(&g, &report, cfg)?;
    write_artifact(&dir, TTP_FILE, &pretty(&annotations)?)?;

    let sg = compress_stage(&g, &report)?;
    write_artifact(&dir, SUBGRAPH_FILE, &sg.to_json()?)?;

    let attspt = patterns_stage(cfg)?;
    write_artifact(&dir, ATTSPT_FILE, &attspt.to_json()?)?;

    let scores = score_stage(&sg, &annotations, &attspt, cfg)?;
    write_artifact(
        &dir,
        SCORES_FILE,
        &pretty(&ScoresFile {
            edges: scores.clone(),
        })?,
    )?;

    let scenario = reason_stage(&sg, &scores, &annotations, &report, cfg)?;
    write_artifact(&dir, SCENARIO_FILE, &scenario.to_json()?)?;
    write_artifact(&dir, SCENARIO_DOT_FILE, &scenario.to_dot())?;

    if let Some(gt_path) = &cfg.ground_truth {
        let gt = GroundTruth::from_json(&read_artifact(gt_path)?)?;
        let m = evaluate_stage(&scenario, &gt)?;
        write_artifact(&dir, METRICS_FILE, &m.to_json()?)?;
    }
    Ok(())
}

/// Loads an anomaly report artifact.
pub fn load_report(path: &Path) -> Result<AnomalyReport> {
    Ok(serde_json::from_str(&read_artifact(path)?)?)
}

/// Loads a TTP annotation artifact.
pub fn load_ttp(path: &Path) -> Result<TtpAnnotation> {
    Ok(serde_json::from_str(&read_artifact(path)?)?)
}

/// Loads an edge-score artifact and checks it matches the subgraph's edges
/// one-for-one.
pub fn load_scores(path: &Path, sg: &AnomalySubgraph) -> Result<Vec<EdgeScoreBreakdown>> {
    let file: ScoresFile = serde_json::from_str(&read_artifact(path)?)?;
    if file.edges.len() != sg.edge_count() {
        return Err(Error::InvalidParameter(format!(
            "score file has {} edges, subgraph has {}",
            file.edges.len(),
            sg.edge_count()
        )));
    }
    for (i, s) in file.edges.iter().enumerate() {
        let e = sg.edge(i);
        if s.src != e.src || s.dst != e.dst {
            return Err(Error::InvalidParameter(format!(
                "score file edge {i} is {}->{}, subgraph has {}->{}",
                s.src, s.dst, e.src, e.dst
            )));
        }
    }
    Ok(file.edges)
}

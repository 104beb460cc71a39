//! Command-line interface: one subcommand per pipeline stage plus an
//! end-to-end `run`. Subcommands chain through artifacts in the output
//! directory, and `run` calls the same stage functions, so both routes
//! produce byte-identical files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use tppr::config::PipelineConfig;
use tppr::error::{Error, Result};
use tppr::eval::{generate, GroundTruth, SynthSpec};
use tppr::pattern::{build_attspt, sample_branch, toy_sequences, AttSpt};
use tppr::pipeline::{self, write_artifact};
use tppr::reasoning::ScenarioGraph;
use tppr::subgraph::AnomalySubgraph;
use tppr::ttp::TacticMap;

#[derive(Parser)]
#[command(
    name = "tppr",
    version,
    about = "Attack investigation over system provenance graphs: anomaly detection, \
             TTP-pattern-guided path reasoning, and attack-scenario reconstruction"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory artifacts are written to (default: out)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master RNG seed for detection and generation
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log filter: error, warn, info, debug, trace
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Audit event file
    #[arg(long)]
    events: Option<PathBuf>,

    /// Event file format: jsonl or csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    /// Isolation-forest ensemble size
    #[arg(long)]
    trees: Option<usize>,

    /// Per-tree subsample size
    #[arg(long)]
    subsample: Option<usize>,

    /// Fraction of nodes to flag abnormal
    #[arg(long)]
    contamination: Option<f64>,

    /// Feature-propagation layers
    #[arg(long)]
    layers: Option<usize>,
}

#[derive(Args)]
struct LabelArgs {
    /// Annotations file: node_id<TAB>technique_id per line
    #[arg(long)]
    annotations: Option<PathBuf>,

    /// Rules file: priority<TAB>field~pattern<TAB>technique_id per line
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct PatternArgs {
    /// Sequence file: one technique chain per line (T1589->T1566->...)
    #[arg(long)]
    sequences: Option<PathBuf>,

    /// Directory of text reports to scan for technique ids
    #[arg(long)]
    reports_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Weight of the tactic term
    #[arg(long)]
    alpha: Option<f64>,

    /// Weight of the technique term
    #[arg(long)]
    beta: Option<f64>,

    /// Technique-transition scale
    #[arg(long)]
    a: Option<f64>,

    /// Tactic-transition scale
    #[arg(long)]
    b: Option<f64>,

    /// Floor for unobserved transitions
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ReasonArgs {
    /// Path-length sensitivity
    #[arg(long)]
    lambda: Option<f64>,

    /// Weight of the length-adjusted edge score
    #[arg(long)]
    w1: Option<f64>,

    /// Weight of the mean node anomaly score
    #[arg(long)]
    w2: Option<f64>,

    /// Path confidence retention threshold
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once; boxing args buys nothing
enum Command {
    /// Parse audit events into the versioned provenance graph artifact
    Ingest {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Score all nodes with the isolation forest and flag the abnormal set
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Label abnormal nodes with techniques and tactics
    Annotate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        labels: LabelArgs,
        /// Anomaly report artifact (default: <out-dir>/anomaly.json)
        #[arg(long)]
        anomaly: Option<PathBuf>,
    },
    /// Compress the graph to abnormal nodes with synthesized edges
    Compress {
        #[command(flatten)]
        input: InputArgs,
        /// Anomaly report artifact (default: <out-dir>/anomaly.json)
        #[arg(long)]
        anomaly: Option<PathBuf>,
    },
    /// Build technique/tactic pattern trees from sequence data
    MinePatterns {
        #[command(flatten)]
        patterns: PatternArgs,
    },
    /// Score subgraph edges against the mined patterns
    Score {
        /// Subgraph artifact (default: <out-dir>/subgraph.json)
        #[arg(long)]
        subgraph: Option<PathBuf>,
        /// Annotation artifact (default: <out-dir>/ttp.json)
        #[arg(long)]
        ttp: Option<PathBuf>,
        /// Pattern-tree artifact (default: <out-dir>/attspt.json)
        #[arg(long)]
        attspt: Option<PathBuf>,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Extract candidate paths and merge them into the attack scenario
    Reason {
        /// Subgraph artifact (default: <out-dir>/subgraph.json)
        #[arg(long)]
        subgraph: Option<PathBuf>,
        /// Edge-score artifact (default: <out-dir>/scores.json)
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Annotation artifact (default: <out-dir>/ttp.json)
        #[arg(long)]
        ttp: Option<PathBuf>,
        /// Anomaly report artifact (default: <out-dir>/anomaly.json)
        #[arg(long)]
        anomaly: Option<PathBuf>,
        #[command(flatten)]
        reason: ReasonArgs,
    },
    /// Compare a scenario against ground truth
    Evaluate {
        /// Scenario artifact (default: <out-dir>/scenario.json)
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Ground-truth JSON file
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Generate a synthetic labeled scenario for evaluation
    Synth {
        /// Attack-chain length including the C2 socket
        #[arg(long, default_value_t = 6)]
        chain_len: usize,
        /// Benign background processes
        #[arg(long, default_value_t = 100)]
        benign: usize,
        /// Fraction of benign processes given noisy behavior
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Pattern-tree artifact to sample the attack chain from
        /// (default: built-in demo tree)
        #[arg(long)]
        attspt: Option<PathBuf>,
    },
    /// Run the full pipeline end to end
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        patterns: PatternArgs,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        reason: ReasonArgs,
        /// Ground-truth JSON file (enables the metrics artifact)
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(cli.log_level.clone()),
    )
    .format_timestamp(None)
    .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_input(cfg: &mut PipelineConfig, args: &InputArgs) {
    if let Some(v) = &args.events {
        cfg.events = Some(v.clone());
    }
    if let Some(v) = &args.format {
        cfg.format = v.clone();
    }
}

fn apply_detect(cfg: &mut PipelineConfig, args: &DetectArgs) {
    if let Some(v) = args.trees {
        cfg.trees = v;
    }
    if let Some(v) = args.subsample {
        cfg.subsample = v;
    }
    if let Some(v) = args.contamination {
        cfg.contamination = v;
    }
    if let Some(v) = args.layers {
        cfg.layers = v;
    }
}

fn apply_labels(cfg: &mut PipelineConfig, args: &LabelArgs) {
    if let Some(v) = &args.annotations {
        cfg.annotations = Some(v.clone());
    }
    if let Some(v) = &args.rules {
        cfg.rules = Some(v.clone());
    }
}

fn apply_patterns(cfg: &mut PipelineConfig, args: &PatternArgs) {
    if let Some(v) = &args.sequences {
        cfg.sequences = Some(v.clone());
    }
    if let Some(v) = &args.reports_dir {
        cfg.reports_dir = Some(v.clone());
    }
}

fn apply_score(cfg: &mut PipelineConfig, args: &ScoreArgs) {
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.b {
        cfg.b = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
}

fn apply_reason(cfg: &mut PipelineConfig, args: &ReasonArgs) {
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.w1 {
        cfg.w1 = v;
    }
    if let Some(v) = args.w2 {
        cfg.w2 = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
}

fn artifact_or(explicit: Option<PathBuf>, cfg: &PipelineConfig, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| cfg.out_dir.join(name))
}

fn announce(path: &std::path::Path) {
    println!("wrote {}", path.display());
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Ingest { input } => {
            apply_input(&mut cfg, &input);
            cfg.validate()?;
            let g = pipeline::ingest_stage(&cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::GRAPH_FILE,
                &g.to_json()?,
            )?);
        }
        Command::Detect { input, detect } => {
            apply_input(&mut cfg, &input);
            apply_detect(&mut cfg, &detect);
            cfg.validate()?;
            let g = pipeline::ingest_stage(&cfg)?;
            let report = pipeline::detect_stage(&g, &cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::ANOMALY_FILE,
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?);
        }
        Command::Annotate {
            input,
            labels,
            anomaly,
        } => {
            apply_input(&mut cfg, &input);
            apply_labels(&mut cfg, &labels);
            cfg.validate()?;
            let g = pipeline::ingest_stage(&cfg)?;
            let report = pipeline::load_report(&artifact_or(anomaly, &cfg, pipeline::ANOMALY_FILE))?;
            let annotations = pipeline::annotate_stage(&g, &report, &cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::TTP_FILE,
                &(serde_json::to_string_pretty(&annotations)? + "\n"),
            )?);
        }
        Command::Compress { input, anomaly } => {
            apply_input(&mut cfg, &input);
            cfg.validate()?;
            let g = pipeline::ingest_stage(&cfg)?;
            let report = pipeline::load_report(&artifact_or(anomaly, &cfg, pipeline::ANOMALY_FILE))?;
            let sg = pipeline::compress_stage(&g, &report)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::SUBGRAPH_FILE,
                &sg.to_json()?,
            )?);
        }
        Command::MinePatterns { patterns } => {
            apply_patterns(&mut cfg, &patterns);
            cfg.validate()?;
            let attspt = pipeline::patterns_stage(&cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::ATTSPT_FILE,
                &attspt.to_json()?,
            )?);
        }
        Command::Score {
            subgraph,
            ttp,
            attspt,
            score,
        } => {
            apply_score(&mut cfg, &score);
            cfg.validate()?;
            let sg = AnomalySubgraph::from_json(&pipeline::read_artifact(&artifact_or(
                subgraph,
                &cfg,
                pipeline::SUBGRAPH_FILE,
            ))?)?;
            let annotations = pipeline::load_ttp(&artifact_or(ttp, &cfg, pipeline::TTP_FILE))?;
            let tree = AttSpt::from_json(&pipeline::read_artifact(&artifact_or(
                attspt,
                &cfg,
                pipeline::ATTSPT_FILE,
            ))?)?;
            let scores = pipeline::score_stage(&sg, &annotations, &tree, &cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::SCORES_FILE,
                &(serde_json::to_string_pretty(&pipeline::ScoresFile { edges: scores })? + "\n"),
            )?);
        }
        Command::Reason {
            subgraph,
            scores,
            ttp,
            anomaly,
            reason,
        } => {
            apply_reason(&mut cfg, &reason);
            cfg.validate()?;
            let sg = AnomalySubgraph::from_json(&pipeline::read_artifact(&artifact_or(
                subgraph,
                &cfg,
                pipeline::SUBGRAPH_FILE,
            ))?)?;
            let edge_scores =
                pipeline::load_scores(&artifact_or(scores, &cfg, pipeline::SCORES_FILE), &sg)?;
            let annotations = pipeline::load_ttp(&artifact_or(ttp, &cfg, pipeline::TTP_FILE))?;
            let report = pipeline::load_report(&artifact_or(anomaly, &cfg, pipeline::ANOMALY_FILE))?;
            let scenario = pipeline::reason_stage(&sg, &edge_scores, &annotations, &report, &cfg)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::SCENARIO_FILE,
                &scenario.to_json()?,
            )?);
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::SCENARIO_DOT_FILE,
                &scenario.to_dot(),
            )?);
        }
        Command::Evaluate {
            scenario,
            ground_truth,
        } => {
            if let Some(path) = ground_truth {
                cfg.ground_truth = Some(path);
            }
            cfg.validate()?;
            let scenario = ScenarioGraph::from_json(&pipeline::read_artifact(&artifact_or(
                scenario,
                &cfg,
                pipeline::SCENARIO_FILE,
            ))?)?;
            let gt_path = cfg.ground_truth.clone().ok_or_else(|| {
                Error::Config("no ground truth: pass --ground-truth or set it in the config".into())
            })?;
            let gt = GroundTruth::from_json(&pipeline::read_artifact(&gt_path)?)?;
            let m = pipeline::evaluate_stage(&scenario, &gt)?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::METRICS_FILE,
                &m.to_json()?,
            )?);
        }
        Command::Synth {
            chain_len,
            benign,
            noise,
            attspt,
        } => {
            cfg.validate()?;
            let tree = match attspt {
                Some(path) => AttSpt::from_json(&pipeline::read_artifact(&path)?)?,
                None => build_attspt(&toy_sequences(), &TacticMap::builtin()).canonicalize(),
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let techniques = sample_branch(&tree.technique_pt, chain_len, &mut rng)?;
            let out = generate(&SynthSpec {
                chain_len,
                benign,
                noise_fraction: noise,
                seed: cfg.seed,
                techniques,
            })?;
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::EVENTS_FILE,
                &out.events_jsonl,
            )?);
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::ANNOTATIONS_FILE,
                &out.annotations_tsv,
            )?);
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::GROUND_TRUTH_FILE,
                &out.ground_truth.to_json()?,
            )?);
            let sequences_text = tree
                .technique_pt
                .leaf_paths()
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|t| t.as_str())
                        .collect::<Vec<_>>()
                        .join("->")
                })
                .collect::<Vec<_>>()
                .join("\n")
                + "\n";
            announce(&write_artifact(
                &cfg.out_dir,
                pipeline::SEQUENCES_FILE,
                &sequences_text,
            )?);
        }
        Command::Run {
            input,
            detect,
            labels,
            patterns,
            score,
            reason,
            ground_truth,
        } => {
            apply_input(&mut cfg, &input);
            apply_detect(&mut cfg, &detect);
            apply_labels(&mut cfg, &labels);
            apply_patterns(&mut cfg, &patterns);
            apply_score(&mut cfg, &score);
            apply_reason(&mut cfg, &reason);
            if let Some(path) = ground_truth {
                cfg.ground_truth = Some(path);
            }
            pipeline::run_all(&cfg)?;
            println!("artifacts in {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

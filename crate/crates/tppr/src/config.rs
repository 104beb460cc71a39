//! Pipeline configuration: one struct holding every tunable, a flat
//! `key = value` file format, and helpers to hand each module its
//! parameters. Unknown keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use crate::anomaly::{DetectorConfig, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::reasoning::ConfidenceParams;
use crate::scoring::ScoringParams;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    // Inputs.
    pub events: Option<PathBuf>,
    /// Event file format: "jsonl" or "csv".
    pub format: String,
    pub annotations: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub sequences: Option<PathBuf>,
    pub reports_dir: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    // Detection.
    pub trees: usize,
    pub subsample: usize,
    pub contamination: f64,
    pub layers: usize,
    // Edge scoring.
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    // Path confidence.
    pub lambda: f64,
    pub w1: f64,
    pub w2: f64,
    pub theta: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let det = DetectorConfig::default();
        let emb = EmbeddingConfig::default();
        let sc = ScoringParams::default();
        let cf = ConfidenceParams::default();
        PipelineConfig {
            events: None,
            format: "jsonl".into(),
            annotations: None,
            rules: None,
            sequences: None,
            reports_dir: None,
            ground_truth: None,
            out_dir: PathBuf::from("out"),
            seed: det.seed,
            trees: det.trees,
            subsample: det.subsample,
            contamination: det.contamination,
            layers: emb.layers,
            alpha: sc.alpha,
            beta: sc.beta,
            a: sc.a,
            b: sc.b,
            epsilon: sc.epsilon,
            lambda: cf.lambda,
            w1: cf.w1,
            w2: cf.w2,
            theta: cf.theta,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

impl PipelineConfig {
    /// Parses a flat `key = value` file into defaults. `#` starts a
    /// comment; blank lines are skipped; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    i + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::for_file(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key. Used by both the file parser and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "events" => self.events = Some(PathBuf::from(value)),
            "format" => self.format = value.to_string(),
            "annotations" => self.annotations = Some(PathBuf::from(value)),
            "rules" => self.rules = Some(PathBuf::from(value)),
            "sequences" => self.sequences = Some(PathBuf::from(value)),
            "reports_dir" => self.reports_dir = Some(PathBuf::from(value)),
            "ground_truth" => self.ground_truth = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "trees" => self.trees = parse_num(key, value)?,
            "subsample" => self.subsample = parse_num(key, value)?,
            "contamination" => self.contamination = parse_num(key, value)?,
            "layers" => self.layers = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "b" => self.b = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "w1" => self.w1 = parse_num(key, value)?,
            "w2" => self.w2 = parse_num(key, value)?,
            "theta" => self.theta = parse_num(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Re-validates every module's parameter invariants.
    pub fn validate(&self) -> Result<()> {
        if self.format != "jsonl" && self.format != "csv" {
            return Err(Error::Config(format!(
                "format must be 'jsonl' or 'csv', got '{}'",
                self.format
            )));
        }
        self.detector().validate()?;
        self.scoring().validate()?;
        self.confidence().validate()?;
        Ok(())
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            trees: self.trees,
            subsample: self.subsample,
            contamination: self.contamination,
            seed: self.seed,
        }
    }

    pub fn embedding(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            layers: self.layers,
        }
    }

    pub fn scoring(&self) -> ScoringParams {
        ScoringParams {
            a: self.a,
            b: self.b,
            epsilon: self.epsilon,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn confidence(&self) -> ConfidenceParams {
        ConfidenceParams {
            lambda: self.lambda,
            w1: self.w1,
            w2: self.w2,
            theta: self.theta,
        }
    }
}

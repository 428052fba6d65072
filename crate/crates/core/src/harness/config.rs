//! Run configuration and its key-value text format.
//!
//! A config file holds one `key = value` per line; `#` starts a comment.
//! The same keys are accepted as command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::selector::SelectionConfig;
use crate::toy::{CorpusSpec, ModelSpec, OptimizerSpec};

/// Trade-off factor calibrated to the toy model's score magnitudes. Nuclear
/// norms there spread over tens of units, embedding distances over a few,
/// so the large-model default leaves diversity inert.
pub const TOY_ALPHA: f64 = 10.0;

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "UDS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub selection: SelectionConfig,
    pub model: ModelSpec,
    pub corpus: CorpusSpec,
    pub optimizer: OptimizerSpec,
    pub steps: usize,
    pub eval_interval: usize,
    pub output_dir: Option<PathBuf>,
    pub master_seed: u64,
    /// Record per-sample loss change and its correlation with the nuclear
    /// norm every step (costs two extra forward passes per candidate).
    pub track_correlation: bool,
    /// Write per-sample score records to the log.
    pub log_scores: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            selection: SelectionConfig {
                alpha: TOY_ALPHA,
                ..SelectionConfig::default()
            },
            model: ModelSpec::default(),
            corpus: CorpusSpec::default(),
            optimizer: OptimizerSpec::adam(1e-2),
            steps: 300,
            eval_interval: 50,
            output_dir: None,
            master_seed: 0,
            track_correlation: false,
            log_scores: true,
        }
    }
}

/// Every key understood by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "batch_size",
    "select_k",
    "alpha",
    "buffer_capacity",
    "d1",
    "d2",
    "scorer",
    "response_only",
    "length_normalize",
    "arch",
    "vocab",
    "context",
    "embed_dim",
    "hidden",
    "seq_len",
    "prompt_len",
    "distinct",
    "clusters",
    "duplication",
    "noise",
    "branching",
    "period",
    "templated",
    "eval_size",
    "optimizer",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "steps",
    "eval_interval",
    "output_dir",
    "seed",
    "track_correlation",
    "log_scores",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| UdsError::Config(format!("bad value {value:?} for `{key}`")))
}

impl RunConfig {
    /// Sets one field by key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let sel = &mut self.selection;
        match key {
            "batch_size" => sel.batch_size = parse(key, v)?,
            "select_k" => sel.select_k = parse(key, v)?,
            "alpha" => sel.alpha = parse(key, v)?,
            "buffer_capacity" => sel.buffer_capacity = parse(key, v)?,
            "d1" => sel.d1 = parse(key, v)?,
            "d2" => sel.d2 = parse(key, v)?,
            "scorer" => sel.scorer = v.parse()?,
            "response_only" => sel.response_only = parse(key, v)?,
            "length_normalize" => sel.length_normalize = parse(key, v)?,
            "arch" => self.model.arch = v.parse()?,
            "vocab" => {
                self.model.vocab = parse(key, v)?;
                self.corpus.vocab = self.model.vocab;
            }
            "context" => self.model.context = parse(key, v)?,
            "embed_dim" => self.model.embed_dim = parse(key, v)?,
            "hidden" => self.model.hidden = parse(key, v)?,
            "seq_len" => self.corpus.seq_len = parse(key, v)?,
            "prompt_len" => self.corpus.prompt_len = parse(key, v)?,
            "distinct" => self.corpus.distinct = parse(key, v)?,
            "clusters" => self.corpus.clusters = parse(key, v)?,
            "duplication" => self.corpus.duplication = parse(key, v)?,
            "noise" => self.corpus.noise = parse(key, v)?,
            "branching" => self.corpus.branching = parse(key, v)?,
            "period" => self.corpus.period = parse(key, v)?,
            "templated" => self.corpus.templated = parse(key, v)?,
            "eval_size" => self.corpus.eval_size = parse(key, v)?,
            "optimizer" => {
                let lr = self.optimizer.lr();
                self.optimizer = match v.to_ascii_lowercase().as_str() {
                    "sgd" => OptimizerSpec::Sgd { lr },
                    "adam" => OptimizerSpec::adam(lr),
                    _ => return Err(UdsError::Config(format!("unknown optimizer {v:?}"))),
                };
            }
            "lr" => {
                let new: f64 = parse(key, v)?;
                match &mut self.optimizer {
                    OptimizerSpec::Sgd { lr } | OptimizerSpec::Adam { lr, .. } => *lr = new,
                }
            }
            "beta1" | "beta2" | "eps" => {
                let x: f64 = parse(key, v)?;
                match &mut self.optimizer {
                    OptimizerSpec::Adam { beta1, beta2, eps, .. } => match key {
                        "beta1" => *beta1 = x,
                        "beta2" => *beta2 = x,
                        _ => *eps = x,
                    },
                    OptimizerSpec::Sgd { .. } => {
                        return Err(UdsError::Config(format!("`{key}` needs optimizer = adam")))
                    }
                }
            }
            "steps" => self.steps = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "seed" => self.master_seed = parse(key, v)?,
            "track_correlation" => self.track_correlation = parse(key, v)?,
            "log_scores" => self.log_scores = parse(key, v)?,
            _ => return Err(UdsError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                UdsError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| UdsError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Renders every key so the output parses back to the same config.
    pub fn to_text(&self) -> String {
        let s = &self.selection;
        let mut lines = vec![
            format!("batch_size = {}", s.batch_size),
            format!("select_k = {}", s.select_k),
            format!("alpha = {:?}", s.alpha),
            format!("buffer_capacity = {}", s.buffer_capacity),
            format!("d1 = {}", s.d1),
            format!("d2 = {}", s.d2),
            format!("scorer = {}", s.scorer),
            format!("response_only = {}", s.response_only),
            format!("length_normalize = {}", s.length_normalize),
            format!(
                "arch = {}",
                match self.model.arch {
                    crate::toy::Architecture::LinearSoftmax => "linear",
                    crate::toy::Architecture::TinyMlp => "mlp",
                }
            ),
            format!("vocab = {}", self.model.vocab),
            format!("context = {}", self.model.context),
            format!("embed_dim = {}", self.model.embed_dim),
            format!("hidden = {}", self.model.hidden),
            format!("seq_len = {}", self.corpus.seq_len),
            format!("prompt_len = {}", self.corpus.prompt_len),
            format!("distinct = {}", self.corpus.distinct),
            format!("clusters = {}", self.corpus.clusters),
            format!("duplication = {}", self.corpus.duplication),
            format!("noise = {:?}", self.corpus.noise),
            format!("branching = {}", self.corpus.branching),
            format!("period = {}", self.corpus.period),
            format!("templated = {}", self.corpus.templated),
            format!("eval_size = {}", self.corpus.eval_size),
        ];
        match self.optimizer {
            OptimizerSpec::Sgd { lr } => {
                lines.push("optimizer = sgd".into());
                lines.push(format!("lr = {lr:?}"));
            }
            OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                lines.push("optimizer = adam".into());
                lines.push(format!("lr = {lr:?}"));
                lines.push(format!("beta1 = {beta1:?}"));
                lines.push(format!("beta2 = {beta2:?}"));
                lines.push(format!("eps = {eps:?}"));
            }
        }
        lines.push(format!("steps = {}", self.steps));
        lines.push(format!("eval_interval = {}", self.eval_interval));
        if let Some(dir) = &self.output_dir {
            lines.push(format!("output_dir = {}", dir.display()));
        }
        lines.push(format!("seed = {}", self.master_seed));
        lines.push(format!("track_correlation = {}", self.track_correlation));
        lines.push(format!("log_scores = {}", self.log_scores));
        lines.join("\n") + "\n"
    }

    /// Replaces the output directory with `$UDS_OUTPUT_DIR` when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = Some(PathBuf::from(dir));
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        self.model.validate()?;
        self.corpus.validate()?;
        if self.corpus.vocab != self.model.vocab {
            return Err(UdsError::Config(format!(
                "corpus vocab {} differs from model vocab {}",
                self.corpus.vocab, self.model.vocab
            )));
        }
        if self.corpus.seq_len - 1 > self.model.context {
            return Err(UdsError::Config(format!(
                "{} input positions exceed the context window {}",
                self.corpus.seq_len - 1,
                self.model.context
            )));
        }
        if self.selection.d1 > self.model.vocab || self.selection.d2 > self.model.context {
            return Err(UdsError::Config(format!(
                "projection dims ({}, {}) exceed (vocab {}, context {})",
                self.selection.d1, self.selection.d2, self.model.vocab, self.model.context
            )));
        }
        if self.corpus.train_size() < self.selection.batch_size {
            return Err(UdsError::Config("corpus smaller than one batch".into()));
        }
        if self.eval_interval == 0 {
            return Err(UdsError::Config("eval_interval must be >= 1".into()));
        }
        let lr = self.optimizer.lr();
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(UdsError::Config(format!("learning rate {lr} is invalid")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::Scorer;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.selection.alpha = 0.125;
        cfg.selection.scorer = Scorer::MaxGrad;
        cfg.output_dir = Some("out/x".into());
        cfg.optimizer = OptimizerSpec::Sgd { lr: 0.3 };
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn file_values_then_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nselect_k = 2\nalpha=0.5 # trailing\n\n").unwrap();
        assert_eq!(cfg.selection.select_k, 2);
        cfg.set("select_k", "3").unwrap();
        assert_eq!(cfg.selection.select_k, 3);
        assert_eq!(cfg.selection.alpha, 0.5);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("nope = 1").is_err());
        assert!(cfg.apply_text("select_k").is_err());
        assert!(cfg.set("select_k", "many").is_err());
    }

    #[test]
    fn k_above_m_rejected_at_validation() {
        let mut cfg = RunConfig::default();
        cfg.set("buffer_capacity", "2").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let sample = |k: &str| match k {
            "scorer" => "random",
            "arch" => "mlp",
            "optimizer" => "adam",
            "output_dir" => "/tmp/x",
            "response_only" | "length_normalize" | "track_correlation" | "log_scores" => "true",
            "alpha" | "noise" | "lr" | "beta1" | "beta2" | "eps" => "0.5",
            _ => "7",
        };
        for k in KEYS {
            let mut cfg = RunConfig::default();
            cfg.set(k, sample(k)).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::graph::{DEFAULT_LAMBDA, DEFAULT_TARGET_NODES, DEFAULT_TAU};
use crate::metrics::{BleuOptions, DEFAULT_ROUGE_BETA};
use crate::scoring::{BackendKind, ScorerBackendConfig};
use crate::section::ChunkingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    Template,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairsConfig {
    /// Also write seeded train/validation/test splits with these ratios.
    pub split: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// JSONL of `{"context": ..., "references": [...]}` for scoring question generation.
    pub references: Option<PathBuf>,
    pub bleu: BleuOptions,
    pub rouge_beta: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            references: None,
            bleu: BleuOptions::default(),
            rouge_beta: DEFAULT_ROUGE_BETA,
        }
    }
}

/// Everything a pipeline run depends on. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub lambda: f64,
    pub tau: f64,
    pub target_nodes: usize,
    pub chunking: ChunkingConfig,
    /// Embedding and specificity backend. `template_qg` is not valid here.
    pub backend: ScorerBackendConfig,
    pub question_generator: QuestionSource,
    /// JSONL of precomputed specificity distributions keyed by node id pairs;
    /// replaces the backend's classifier when set.
    pub specificity_scores: Option<PathBuf>,
    pub pairs: PairsConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("textbook.md"),
            output_dir: PathBuf::from("dqm_out"),
            seed: 0,
            lambda: DEFAULT_LAMBDA,
            tau: DEFAULT_TAU,
            target_nodes: DEFAULT_TARGET_NODES,
            chunking: ChunkingConfig::default(),
            backend: ScorerBackendConfig::default(),
            question_generator: QuestionSource::Template,
            specificity_scores: None,
            pairs: PairsConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl PipelineConfig {
    /// Parses a TOML config. Relative paths are taken relative to the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        resolve(base, &mut config.input);
        resolve(base, &mut config.output_dir);
        for p in [&mut config.specificity_scores, &mut config.eval.references]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("lambda", self.lambda)?;
        unit("tau", self.tau)?;
        if self.target_nodes == 0 {
            return Err(PipelineError::Config("target_nodes must be at least 1".into()));
        }
        if !(self.chunking.percentile.is_finite() && (0.0..=100.0).contains(&self.chunking.percentile)) {
            return Err(PipelineError::Config(format!(
                "chunking.percentile = {} is outside [0, 100]",
                self.chunking.percentile
            )));
        }
        if self.chunking.max_chars == 0 {
            return Err(PipelineError::Config("chunking.max_chars must be at least 1".into()));
        }
        if self.backend.kind == BackendKind::TemplateQg {
            return Err(PipelineError::Config(
                "backend.kind = template_qg only generates questions; use tfidf_baseline, \
                 hierarchy_oracle or remote and set question_generator = \"template\""
                    .into(),
            ));
        }
        self.backend
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.question_generator == QuestionSource::Remote && self.backend.endpoint.is_none() {
            return Err(PipelineError::Config(
                "question_generator = \"remote\" needs backend.endpoint".into(),
            ));
        }
        if let Some([train, val]) = self.pairs.split {
            if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&val) || train + val > 1.0 {
                return Err(PipelineError::Config(format!(
                    "pairs.split = [{train}, {val}] must be ratios summing to at most 1"
                )));
            }
        }
        if self.eval.bleu.max_n == 0 {
            return Err(PipelineError::Config("eval.bleu.max_n must be at least 1".into()));
        }
        if !(self.eval.rouge_beta > 0.0 && self.eval.rouge_beta.is_finite()) {
            return Err(PipelineError::Config("eval.rouge_beta must be positive".into()));
        }
        Ok(())
    }
}

//! Staged, resumable end-to-end runs.
//!
//! Stages run in a fixed order and communicate only through JSON/JSONL files
//! in the output directory. Each completed stage is recorded in
//! `manifest.json` with hashes of its inputs and outputs; a stage whose
//! inputs, settings and outputs are unchanged is skipped unless forced.

mod artifacts;
mod config;
mod manifest;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::GraphError;
use crate::metrics::MetricsError;
use crate::pairs::PairError;
use crate::scoring::ScoringError;
use crate::section::SectionError;

pub use artifacts::{read_jsonl, write_jsonl, EmbeddingRecord, QuestionRecord, ReferenceRecord};
pub use config::{EvalConfig, PairsConfig, PipelineConfig, QuestionSource};
pub use manifest::{hash_file, sha256_hex, Manifest, StageRecord, MANIFEST_FILE};
pub use stages::{artifact, load_tree, stage_path, IngestReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` requires: {requires} (missing {})", .path.display())]
    MissingArtifact {
        stage: Stage,
        requires: Stage,
        path: PathBuf,
    },
    #[error("{0}")]
    Backend(String),
    #[error("{}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", .path.display())]
    Json { path: PathBuf, message: String },
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pairs(#[from] PairError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    /// Process exit status: 1 validation, 2 backend, 3 missing artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingArtifact { .. } => 3,
            PipelineError::Backend(_)
            | PipelineError::Scoring(ScoringError::Backend { .. })
            | PipelineError::Graph(GraphError::Scoring {
                source: ScoringError::Backend { .. },
                ..
            }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Pairs,
    Questions,
    Score,
    Build,
    Export,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Pairs,
        Stage::Questions,
        Stage::Score,
        Stage::Build,
        Stage::Export,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Pairs => "pairs",
            Stage::Questions => "questions",
            Stage::Score => "score",
            Stage::Build => "build",
            Stage::Export => "export",
            Stage::Eval => "eval",
        }
    }

    /// Parses a comma-separated list; `all` selects every stage.
    pub fn parse_list(list: &str) -> Result<Vec<Stage>, PipelineError> {
        let mut stages = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "all" {
                stages.extend(Stage::ALL);
            } else {
                stages.push(item.parse()?);
            }
        }
        if stages.is_empty() {
            return Err(PipelineError::Config("no stages selected".into()));
        }
        stages.sort();
        stages.dedup();
        Ok(stages)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| {
                PipelineError::Config(format!(
                    "unknown stage `{s}` (expected one of {})",
                    Stage::ALL.map(Stage::name).join(", ")
                ))
            })
    }
}

/// Seed for one stage, derived from the run seed and the stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub duration: Duration,
}

/// Runs `stages` in pipeline order, skipping those that are up to date
/// unless `force` is set. The manifest is saved after every stage.
pub fn run_pipeline(
    config: &PipelineConfig,
    stages: &[Stage],
    force: bool,
) -> Result<Vec<StageOutcome>, PipelineError> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut manifest = Manifest::load(dir)?;
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();

    let mut outcomes = Vec::new();
    for stage in ordered {
        for &(name, producer) in stages::requirements(stage) {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(PipelineError::MissingArtifact {
                    stage,
                    requires: producer,
                    path,
                });
            }
        }
        let mut inputs = BTreeMap::new();
        for (key, path) in stages::input_files(stage, config) {
            inputs.insert(key, hash_file(&path)?);
        }
        let seed = stage_seed(config.seed, stage.name());
        let config_hash = sha256_hex(stages::settings(stage, config, seed).to_string().as_bytes());

        if !force && manifest.is_current(stage.name(), &config_hash, &inputs, dir) {
            log::info!("{stage}: up to date, skipped");
            outcomes.push(StageOutcome {
                stage,
                status: StageStatus::Skipped,
                duration: Duration::ZERO,
            });
            continue;
        }

        log::info!("{stage}: running");
        let started = Instant::now();
        let written = stages::run(stage, config, seed)?;
        let duration = started.elapsed();
        let mut outputs = BTreeMap::new();
        for name in written {
            let hash = hash_file(&dir.join(&name))?;
            outputs.insert(name, hash);
        }
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                stage: stage.name().to_string(),
                config_hash,
                seed,
                inputs,
                outputs,
                duration_ms: duration.as_millis() as u64,
            },
        );
        manifest.save(dir)?;
        log::info!("{stage}: done in {:.2?}", duration);
        outcomes.push(StageOutcome {
            stage,
            status: StageStatus::Ran,
            duration,
        });
    }
    Ok(outcomes)
}

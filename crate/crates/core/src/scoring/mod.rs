//! Pluggable scorers: embeddings for semantic similarity, the specificity
//! classifier, and question generation.
//!
//! The offline backends ([`TfidfEmbedder`], [`HierarchyOracle`],
//! [`UniformClassifier`], [`TemplateGenerator`]) are deterministic and need no
//! model; [`RemoteBackend`] speaks the HTTP protocol of the model service.

mod oracle;
mod precomputed;
mod remote;
mod template;
mod tfidf;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::section::{Relation, SectionId};

pub use oracle::{HierarchyOracle, UniformClassifier};
pub use precomputed::{PrecomputedScore, PrecomputedScores};
pub use remote::{HealthStatus, RemoteBackend};
pub use template::{TemplateGenerator, TEMPLATE_PREFIX, TEMPLATE_WORDS};
pub use tfidf::TfidfEmbedder;

/// Request and response bodies of the model service protocol.
pub mod wire {
    pub use super::remote::{
        EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, PairPayload,
        SpecificityRequest, SpecificityResponse, WireDistribution, EMBED_PATH, GENERATE_PATH,
        HEALTH_PATH, SPECIFICITY_PATH,
    };
}

/// Tolerance on the probability sum of distributions built in-process.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;
/// Tolerance on the probability sum of distributions received over the wire.
pub const WIRE_DISTRIBUTION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("text {index} is empty or has no word tokens")]
    EmptyText { index: usize },
    #[error("text {index} embeds to the zero vector")]
    ZeroVector { index: usize },
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedCosine,
    #[error("invalid specificity distribution: {0}")]
    InvalidDistribution(String),
    #[error("pair {index}: the hierarchy oracle needs section ids for both items")]
    MissingSectionMetadata { index: usize },
    #[error("no precomputed score for pair ({id_a}, {id_b})")]
    MissingScore { id_a: String, id_b: String },
    #[error("backend returned an empty question for context {index}")]
    EmptyGeneration { index: usize },
    #[error("backend returned {got} results for {expected} inputs")]
    LengthMismatch { expected: usize, got: usize },
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Backend {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("reading precomputed scores")]
    Io(#[from] std::io::Error),
}

/// A unit-length embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// L2-normalizes `values`. Fails on non-finite entries or a zero vector.
    pub fn normalized(values: Vec<f64>) -> Result<Self, ScoringError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScoringError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ScoringError::UndefinedCosine);
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Cosine against another unit vector, i.e. the dot product clamped to [-1, 1].
    pub fn cosine(&self, other: &Embedding) -> Result<f64, ScoringError> {
        if self.dim() != other.dim() {
            return Err(ScoringError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        Ok(dot.clamp(-1.0, 1.0))
    }
}

/// Standard cosine similarity of two raw vectors.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, ScoringError> {
    if u.len() != v.len() {
        return Err(ScoringError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(ScoringError::UndefinedCosine);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Similarity score used for merging and edge weights: negative cosines are
/// clamped to zero so the score lives in [0, 1].
pub fn clamp_similarity(cosine: f64) -> f64 {
    cosine.clamp(0.0, 1.0)
}

/// The text embedded for a question: question and context joined by one space.
pub fn joined_text(question: &str, context: &str) -> String {
    let mut s = String::with_capacity(question.len() + context.len() + 1);
    s.push_str(question);
    s.push(' ');
    s.push_str(context);
    s
}

/// Semantic similarity of two (question, context) items in [0, 1].
pub fn question_similarity(
    q_i: &str,
    c_i: &str,
    q_j: &str,
    c_j: &str,
    embedder: &dyn Embedder,
) -> Result<f64, ScoringError> {
    let left = joined_text(q_i, c_i);
    let right = joined_text(q_j, c_j);
    let vectors = embedder.embed(&[left.as_str(), right.as_str()])?;
    if vectors.len() != 2 {
        return Err(ScoringError::LengthMismatch {
            expected: 2,
            got: vectors.len(),
        });
    }
    Ok(clamp_similarity(vectors[0].cosine(&vectors[1])?))
}

/// Classifier output over the three relation labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecificityDistribution {
    pub general: f64,
    pub specific: f64,
    pub other: f64,
}

impl SpecificityDistribution {
    pub fn new(general: f64, specific: f64, other: f64) -> Result<Self, ScoringError> {
        Self::checked(general, specific, other, DISTRIBUTION_TOLERANCE)
    }

    /// Validates range and sum within `tolerance`, then renormalizes.
    pub fn checked(
        general: f64,
        specific: f64,
        other: f64,
        tolerance: f64,
    ) -> Result<Self, ScoringError> {
        for (name, p) in [("general", general), ("specific", specific), ("other", other)] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ScoringError::InvalidDistribution(format!(
                    "p_{name} = {p} is outside [0, 1]"
                )));
            }
        }
        let sum = general + specific + other;
        if (sum - 1.0).abs() > tolerance {
            return Err(ScoringError::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1 ± {tolerance}"
            )));
        }
        Ok(Self {
            general: general / sum,
            specific: specific / sum,
            other: other / sum,
        })
    }

    /// 0.98 on `label`, 0.01 on the other two.
    pub fn peaked(label: Relation) -> Self {
        let mut p = [0.01; 3];
        p[label.index()] = 0.98;
        Self {
            general: p[0],
            specific: p[1],
            other: p[2],
        }
    }

    pub fn probability(&self, label: Relation) -> f64 {
        match label {
            Relation::General => self.general,
            Relation::Specific => self.specific,
            Relation::Other => self.other,
        }
    }

    /// Strict argmax. Any tie for the top probability yields `Other`, so a
    /// classifier that cannot separate the two directions asserts no relation.
    pub fn label(&self) -> Relation {
        let top = self.general.max(self.specific).max(self.other);
        let at_top: Vec<Relation> = Relation::ALL
            .into_iter()
            .filter(|&r| self.probability(r) == top)
            .collect();
        match at_top.as_slice() {
            [only] => *only,
            _ => Relation::Other,
        }
    }

    /// The same distribution for the swapped pair.
    pub fn swapped(&self) -> Self {
        Self {
            general: self.specific,
            specific: self.general,
            other: self.other,
        }
    }
}

/// Confidence that the pair is hierarchically related: `1 - p_other`.
pub fn specificity_confidence(dist: &SpecificityDistribution) -> f64 {
    (1.0 - dist.other).clamp(0.0, 1.0)
}

/// A (question, context) item handed to the classifier.
#[derive(Debug, Clone, Copy)]
pub struct QaRef<'a> {
    pub id: &'a str,
    pub question: &'a str,
    pub context: &'a str,
    /// Source section, needed only by the hierarchy oracle.
    pub section: Option<&'a SectionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub question: String,
    /// The backend cut the context to fit its input limit.
    #[serde(default)]
    pub truncated: bool,
}

pub trait Embedder: Send + Sync {
    /// One unit-norm vector per input text, in order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>, ScoringError>;
}

pub trait SpecificityClassifier: Send + Sync {
    fn classify(
        &self,
        pairs: &[(QaRef<'_>, QaRef<'_>)],
    ) -> Result<Vec<SpecificityDistribution>, ScoringError>;
}

pub trait QuestionGenerator: Send + Sync {
    fn generate(&self, contexts: &[&str]) -> Result<Vec<GeneratedQuestion>, ScoringError>;
}

/// Classifies a single pair.
pub fn classify_specificity(
    a: QaRef<'_>,
    b: QaRef<'_>,
    classifier: &dyn SpecificityClassifier,
) -> Result<SpecificityDistribution, ScoringError> {
    let mut out = classifier.classify(&[(a, b)])?;
    match out.pop() {
        Some(d) if out.is_empty() => Ok(d),
        _ => Err(ScoringError::LengthMismatch {
            expected: 1,
            got: out.len() + 1,
        }),
    }
}

/// Generates a question for a single context.
pub fn generate_question(
    context: &str,
    generator: &dyn QuestionGenerator,
) -> Result<GeneratedQuestion, ScoringError> {
    let mut out = generator.generate(&[context])?;
    match out.pop() {
        Some(q) if out.is_empty() => Ok(q),
        _ => Err(ScoringError::LengthMismatch {
            expected: 1,
            got: out.len() + 1,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    TfidfBaseline,
    HierarchyOracle,
    TemplateQg,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerBackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub retries: u32,
}

impl Default for ScorerBackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::TfidfBaseline,
            endpoint: None,
            batch_size: 16,
            timeout_secs: 60.0,
            max_in_flight: 4,
            retries: 2,
        }
    }
}

impl ScorerBackendConfig {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        if self.batch_size == 0 {
            return Err(ScoringError::Config("batch_size must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ScoringError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(ScoringError::Config("timeout_secs must be positive".into()));
        }
        if self.kind == BackendKind::Remote
            && self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty())
        {
            return Err(ScoringError::Config("remote backend requires an endpoint".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

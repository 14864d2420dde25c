use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    Embedder, Embedding, GeneratedQuestion, QaRef, QuestionGenerator, ScorerBackendConfig,
    ScoringError, SpecificityClassifier, SpecificityDistribution, WIRE_DISTRIBUTION_TOLERANCE,
};

pub const EMBED_PATH: &str = "/v1/embed";
pub const SPECIFICITY_PATH: &str = "/v1/specificity";
pub const GENERATE_PATH: &str = "/v1/generate";
pub const HEALTH_PATH: &str = "/health";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairPayload {
    pub q_a: String,
    pub c_a: String,
    pub q_b: String,
    pub c_b: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecificityRequest {
    pub pairs: Vec<PairPayload>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDistribution {
    pub general: f64,
    pub specific: f64,
    pub other: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecificityResponse {
    pub distributions: Vec<WireDistribution>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub contexts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub questions: Vec<String>,
    /// Per-context flag set when the service cut an over-long context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub model_ids: BTreeMap<String, serde_json::Value>,
}

/// HTTP client for the model service.
///
/// Inputs are split into batches of `batch_size`; at most `max_in_flight`
/// batches are outstanding at once. Transport failures and 5xx/429 responses
/// are retried `retries` times with exponential backoff.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
    batch_size: usize,
    max_in_flight: usize,
    retries: u32,
    backoff: Duration,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl RemoteBackend {
    pub fn new(config: &ScorerBackendConfig) -> Result<Self, ScoringError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| ScoringError::Config("remote backend requires an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            base_url: endpoint.trim_end_matches('/').to_string(),
            agent,
            batch_size: config.batch_size,
            max_in_flight: config.max_in_flight,
            retries: config.retries,
            backoff: Duration::from_millis(200),
        })
    }

    /// Overrides the initial retry delay (doubled after every failed attempt).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<HealthStatus, ScoringError> {
        let url = format!("{}{HEALTH_PATH}", self.base_url);
        let status: HealthStatus = self.with_retries(&url, || {
            let response = self.agent.get(&url).call();
            Self::decode(response)
        })?;
        if status.status != "ok" {
            return Err(ScoringError::Backend {
                url,
                attempts: 1,
                message: format!("service reports status `{}`", status.status),
            });
        }
        Ok(status)
    }

    fn decode<T: DeserializeOwned>(
        response: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, Attempt> {
        let mut response = response.map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 400 {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            let message = format!("HTTP {status}: {}", body.chars().take(300).collect::<String>());
            return Err(if status >= 500 || status == 429 {
                Attempt::Retry(message)
            } else {
                Attempt::Fatal(message)
            });
        }
        response
            .body_mut()
            .read_json::<T>()
            .map_err(|e| Attempt::Fatal(format!("malformed response body: {e}")))
    }

    fn with_retries<T>(
        &self,
        url: &str,
        mut call: impl FnMut() -> Result<T, Attempt>,
    ) -> Result<T, ScoringError> {
        let mut delay = self.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match call() {
                Ok(value) => return Ok(value),
                Err(Attempt::Retry(message)) if attempts <= self.retries => {
                    log::warn!("{url}: attempt {attempts} failed ({message}); retrying");
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err(Attempt::Retry(message)) | Err(Attempt::Fatal(message)) => {
                    return Err(ScoringError::Backend {
                        url: url.to_string(),
                        attempts,
                        message,
                    })
                }
            }
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ScoringError> {
        let url = format!("{}{path}", self.base_url);
        self.with_retries(&url, || Self::decode(self.agent.post(&url).send_json(body)))
    }

    /// Runs `call` over batches of `items`, bounded by `max_in_flight`, and
    /// concatenates results in input order.
    fn batched<T: Sync, R: Send>(
        &self,
        items: &[T],
        call: impl Fn(&[T]) -> Result<Vec<R>, ScoringError> + Sync,
    ) -> Result<Vec<R>, ScoringError> {
        let batches: Vec<&[T]> = items.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(items.len());
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<R>, ScoringError>> = thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        let call = &call;
                        scope.spawn(move || {
                            let result = call(batch)?;
                            if result.len() != batch.len() {
                                return Err(ScoringError::LengthMismatch {
                                    expected: batch.len(),
                                    got: result.len(),
                                });
                            }
                            Ok(result)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("remote batch worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

impl Embedder for RemoteBackend {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>, ScoringError> {
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ScoringError::EmptyText { index });
        }
        let vectors = self.batched(texts, |batch| {
            let request = EmbedRequest {
                texts: batch.iter().map(|t| t.to_string()).collect(),
            };
            let response: EmbedResponse = self.post(EMBED_PATH, &request)?;
            Ok(response.vectors)
        })?;
        let dim = vectors.first().map_or(0, Vec::len);
        vectors
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                if v.len() != dim {
                    return Err(ScoringError::DimensionMismatch {
                        left: dim,
                        right: v.len(),
                    });
                }
                Embedding::normalized(v).map_err(|e| match e {
                    ScoringError::UndefinedCosine => ScoringError::ZeroVector { index },
                    other => other,
                })
            })
            .collect()
    }
}

impl SpecificityClassifier for RemoteBackend {
    fn classify(
        &self,
        pairs: &[(QaRef<'_>, QaRef<'_>)],
    ) -> Result<Vec<SpecificityDistribution>, ScoringError> {
        let payloads: Vec<PairPayload> = pairs
            .iter()
            .map(|(a, b)| PairPayload {
                q_a: a.question.to_string(),
                c_a: a.context.to_string(),
                q_b: b.question.to_string(),
                c_b: b.context.to_string(),
            })
            .collect();
        let raw = self.batched(&payloads, |batch| {
            let response: SpecificityResponse = self.post(
                SPECIFICITY_PATH,
                &SpecificityRequest {
                    pairs: batch.to_vec(),
                },
            )?;
            Ok(response.distributions)
        })?;
        raw.into_iter()
            .map(|d| {
                SpecificityDistribution::checked(
                    d.general,
                    d.specific,
                    d.other,
                    WIRE_DISTRIBUTION_TOLERANCE,
                )
            })
            .collect()
    }
}

impl QuestionGenerator for RemoteBackend {
    fn generate(&self, contexts: &[&str]) -> Result<Vec<GeneratedQuestion>, ScoringError> {
        let generated = self.batched(contexts, |batch| {
            let response: GenerateResponse = self.post(
                GENERATE_PATH,
                &GenerateRequest {
                    contexts: batch.iter().map(|c| c.to_string()).collect(),
                },
            )?;
            let flags = response
                .truncated
                .unwrap_or_else(|| vec![false; response.questions.len()]);
            if flags.len() != response.questions.len() {
                return Err(ScoringError::LengthMismatch {
                    expected: response.questions.len(),
                    got: flags.len(),
                });
            }
            Ok(response
                .questions
                .into_iter()
                .zip(flags)
                .map(|(question, truncated)| GeneratedQuestion {
                    question,
                    truncated,
                })
                .collect())
        })?;
        for (index, g) in generated.iter().enumerate() {
            if g.question.trim().is_empty() {
                return Err(ScoringError::EmptyGeneration { index });
            }
            if g.truncated {
                log::warn!("context {index} was truncated by the generation backend");
            }
        }
        Ok(generated)
    }
}

//! Client for the embedding HTTP service.
//!
//! `POST {endpoint}/embed` takes `{"texts": [...], "model_id": ...}` and answers
//! `{"vectors": [[...]], "dimension": D, "model_id": "..."}`; `GET {endpoint}/health`
//! answers `{"status": ..., "model_id": ..., "dimension": D}`.

use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{EmbedError, EmbeddingBatch, EmbeddingProvider, EmbeddingVector, DEFAULT_DIMENSION};

/// Largest batch the service accepts per request.
pub const MAX_SERVICE_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedHttpRequest {
    pub texts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedHttpResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dimension: usize,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_id: String,
    pub dimension: usize,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model_id: Option<String>,
    pub dimension: usize,
    pub batch_size: usize,
    pub max_retries: usize,
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            model_id: None,
            dimension: DEFAULT_DIMENSION,
            batch_size: 64,
            max_retries: 3,
            backoff: Duration::from_millis(100),
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fatal(EmbedError),
}

pub struct RemoteProvider {
    config: RemoteConfig,
    model_id: String,
    agent: Agent,
}

impl RemoteProvider {
    /// Builds a client without contacting the service. The model id is taken from
    /// the config, or derived from the endpoint.
    pub fn new(config: RemoteConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let model_id = config
            .model_id
            .clone()
            .unwrap_or_else(|| format!("remote:{}", config.endpoint));
        RemoteProvider {
            config,
            model_id,
            agent,
        }
    }

    /// Builds a client and asks `/health` for the served model and dimension.
    pub fn connect(mut config: RemoteConfig) -> Result<Self, EmbedError> {
        let probe = RemoteProvider::new(config.clone());
        let health = probe.health()?;
        if health.status != "ok" {
            return Err(EmbedError::ProviderUnavailable {
                endpoint: config.endpoint.clone(),
                attempts: 1,
                reason: format!("service reports status `{}`", health.status),
            });
        }
        config.model_id.get_or_insert(health.model_id);
        config.dimension = health.dimension;
        Ok(RemoteProvider::new(config))
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Attempt<T>) -> Result<T, EmbedError> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let wait = self.config.backoff * 2u32.pow(attempt as u32 - 1);
                debug!("retrying {} in {:?}", self.config.endpoint, wait);
                thread::sleep(wait);
            }
            match call() {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    warn!("embedding request to {} failed: {reason}", self.config.endpoint);
                    last = reason;
                }
            }
        }
        Err(EmbedError::ProviderUnavailable {
            endpoint: self.config.endpoint.clone(),
            attempts: self.config.max_retries + 1,
            reason: last,
        })
    }

    pub fn health(&self) -> Result<HealthResponse, EmbedError> {
        let url = format!("{}/health", self.config.endpoint);
        self.with_retries(|| match self.agent.get(&url).call() {
            Err(e) => Attempt::Retry(e.to_string()),
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if status != 200 {
                    return Attempt::Retry(format!("health returned HTTP {status}"));
                }
                match resp.body_mut().read_json::<HealthResponse>() {
                    Ok(h) => Attempt::Done(h),
                    Err(e) => Attempt::Fatal(EmbedError::Protocol(e.to_string())),
                }
            }
        })
    }

    fn post_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let url = format!("{}/embed", self.config.endpoint);
        let request = EmbedHttpRequest {
            texts: texts.to_vec(),
            model_id: self.config.model_id.clone(),
        };
        let response = self.with_retries(|| match self.agent.post(&url).send_json(&request) {
            Err(e) => Attempt::Retry(e.to_string()),
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                match status {
                    200 => match serde_json::from_str::<EmbedHttpResponse>(&body) {
                        Ok(r) => Attempt::Done(r),
                        Err(e) => Attempt::Fatal(EmbedError::Protocol(format!(
                            "malformed /embed response: {e}"
                        ))),
                    },
                    429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {body}")),
                    _ => Attempt::Fatal(EmbedError::Protocol(format!("HTTP {status}: {body}"))),
                }
            }
        })?;
        if response.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: response.vectors.len(),
            });
        }
        response
            .vectors
            .iter()
            .map(|v| {
                if v.len() != self.config.dimension || response.dimension != self.config.dimension {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.config.dimension,
                        got: v.len(),
                    });
                }
                EmbeddingVector::normalized(v)
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    /// Splits the batch into service-sized chunks and keeps at most
    /// `max_in_flight` of them outstanding.
    fn embed(&self, batch: &EmbeddingBatch) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let size = self.config.batch_size.clamp(1, MAX_SERVICE_BATCH);
        let chunks: Vec<&[String]> = batch.texts.chunks(size).collect();
        let results: Vec<Mutex<Option<Result<Vec<EmbeddingVector>, EmbedError>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = Mutex::new(0usize);
        let workers = self.config.max_in_flight.clamp(1, chunks.len().max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = {
                        let mut n = next.lock().unwrap();
                        let i = *n;
                        *n += 1;
                        i
                    };
                    let Some(chunk) = chunks.get(i) else { break };
                    *results[i].lock().unwrap() = Some(self.post_chunk(chunk));
                });
            }
        });
        let mut out = Vec::with_capacity(batch.len());
        for r in results {
            out.extend(r.into_inner().unwrap().expect("every chunk was processed")?);
        }
        Ok(out)
    }
}

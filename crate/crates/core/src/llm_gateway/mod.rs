//! Provider-agnostic chat completion with bounded retries, repetition, a
//! per-request run log and a deterministic mock provider.

mod http;
mod mock;
mod parse;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::segmentation::PromptBundle;

pub use http::{chat_request_body, extract_reply, HttpProvider};
pub use mock::{MockConfig, MockFallback, MockProvider, MOCK_VOCABULARY};
pub use parse::{parse_numbered_lines, parse_patterns};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Mock(MockConfig),
    /// Chat-completion endpoint; the API key is read from `api_key_env`.
    Http { endpoint: String, model_name: String, api_key_env: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `gpt4o`, `o1`, `r1`, `mock`, or any configured name.
    pub model_id: String,
    /// Column label in report grids.
    pub label: String,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    2048
}

impl ModelSpec {
    pub fn mock(model_id: &str, seed: u64) -> ModelSpec {
        ModelSpec {
            model_id: model_id.into(),
            label: default_label(model_id),
            provider: ProviderConfig::Mock(MockConfig::new(seed)),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }

    pub fn with_mock(model_id: &str, config: MockConfig) -> ModelSpec {
        ModelSpec { provider: ProviderConfig::Mock(config), ..ModelSpec::mock(model_id, 0) }
    }

    /// The three report models, all backed by the mock provider.
    pub fn mock_trio(seed: u64) -> Vec<ModelSpec> {
        ["gpt4o", "o1", "r1"].iter().map(|m| ModelSpec::mock(m, seed)).collect()
    }

    fn provider_key(&self) -> String {
        match &self.provider {
            ProviderConfig::Mock(_) => "mock".into(),
            ProviderConfig::Http { endpoint, .. } => endpoint.clone(),
        }
    }
}

/// `gpt4o` → `4o`; other ids unchanged.
pub fn default_label(model_id: &str) -> String {
    match model_id {
        "gpt4o" => "4o".into(),
        other => other.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub model_id: String,
    /// SHA-256 of the prompt text.
    pub digest: String,
    pub text: String,
    pub latency_ms: u64,
    pub run_index: u32,
    pub chunk_index: usize,
}

/// What a provider sees for one request.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub prompt: &'a str,
    pub digest: &'a str,
    pub run_index: u32,
    pub spec: &'a ModelSpec,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    #[error("transient failure (status {status:?}): {message}")]
    Transient { status: Option<u16>, message: String },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request rejected (status {status:?}): {message}")]
    Content { status: Option<u16>, message: String },
}

pub trait Provider: Send + Sync {
    fn send(&self, request: &ChatRequest<'_>) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempts (last status {status:?}): {message}")]
    Transport { attempts: u32, status: Option<u16>, message: String },
    #[error("authentication error: {0}")]
    Auth(String),
    #[error("content error: {0}")]
    Content(String),
    #[error("all {} runs failed", failures.len())]
    AllRunsFailed { failures: Vec<RunFailure> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub chunk_index: usize,
    pub run_index: u32,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 500 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base · 2^(attempt−1).
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.saturating_sub(1).min(16)))
    }
}

/// One line of the request log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub digest: String,
    pub model_id: String,
    pub run_index: u32,
    pub chunk_index: usize,
    pub latency_ms: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Responses that succeeded plus the runs that did not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RepeatedRun {
    pub responses: Vec<ModelResponse>,
    pub failures: Vec<RunFailure>,
}

type Slot = Mutex<Option<(Result<ModelResponse, GatewayError>, RunLogEntry)>>;

/// Counting semaphore per provider key.
#[derive(Debug, Default)]
struct InFlight {
    counts: Mutex<HashMap<String, usize>>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self, key: &str, limit: usize) {
        let mut counts = self.counts.lock().expect("in-flight lock");
        while counts.get(key).copied().unwrap_or(0) >= limit {
            counts = self.freed.wait(counts).expect("in-flight lock");
        }
        *counts.entry(key.to_string()).or_default() += 1;
    }

    fn release(&self, key: &str) {
        let mut counts = self.counts.lock().expect("in-flight lock");
        if let Some(c) = counts.get_mut(key) {
            *c = c.saturating_sub(1);
        }
        self.freed.notify_all();
    }
}

pub struct Gateway {
    pub retry: RetryPolicy,
    /// Concurrent requests allowed per provider.
    pub max_in_flight: usize,
    in_flight: InFlight,
    log: Mutex<Vec<RunLogEntry>>,
    sleep: Box<dyn Fn(Duration) + Send + Sync>,
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway::new(RetryPolicy::default(), 2)
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("retry", &self.retry)
            .field("max_in_flight", &self.max_in_flight)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(retry: RetryPolicy, max_in_flight: usize) -> Self {
        Gateway {
            retry,
            max_in_flight: max_in_flight.max(1),
            in_flight: InFlight::default(),
            log: Mutex::new(Vec::new()),
            sleep: Box::new(std::thread::sleep),
        }
    }

    /// Replaces the backoff sleeper; tests use this to record delays.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    fn provider(&self, spec: &ModelSpec) -> Result<Box<dyn Provider>, GatewayError> {
        match &spec.provider {
            ProviderConfig::Mock(cfg) => Ok(Box::new(MockProvider::new(cfg.clone()))),
            ProviderConfig::Http { endpoint, model_name, api_key_env } => {
                let key = std::env::var(api_key_env)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| GatewayError::Config(format!("environment variable {api_key_env} is not set")))?;
                Ok(Box::new(HttpProvider::new(endpoint.clone(), model_name.clone(), key)))
            }
        }
    }

    fn call(
        &self,
        provider: &dyn Provider,
        prompt: &str,
        spec: &ModelSpec,
        run_index: u32,
        chunk_index: usize,
    ) -> (Result<ModelResponse, GatewayError>, RunLogEntry) {
        let digest = sha256_hex(prompt);
        let request = ChatRequest { prompt, digest: &digest, run_index, spec };
        let key = spec.provider_key();
        let started = Instant::now();
        let mut attempt = 0;
        let result = loop {
            attempt += 1;
            self.in_flight.acquire(&key, self.max_in_flight);
            let sent = provider.send(&request);
            self.in_flight.release(&key);
            match sent {
                Ok(text) => break Ok(text),
                Err(ProviderError::Transient { status, message }) => {
                    if attempt >= self.retry.max_attempts {
                        break Err(GatewayError::Transport { attempts: attempt, status, message });
                    }
                    (self.sleep)(self.retry.delay(attempt));
                }
                Err(ProviderError::Auth(m)) => break Err(GatewayError::Auth(m)),
                Err(ProviderError::Content { message, .. }) => break Err(GatewayError::Content(message)),
            }
        };
        let latency_ms = match spec.provider {
            ProviderConfig::Mock(_) => 0,
            _ => started.elapsed().as_millis() as u64,
        };
        let entry = RunLogEntry {
            digest: digest.clone(),
            model_id: spec.model_id.clone(),
            run_index,
            chunk_index,
            latency_ms,
            ok: result.is_ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let response = result.map(|text| ModelResponse {
            model_id: spec.model_id.clone(),
            digest,
            text,
            latency_ms,
            run_index,
            chunk_index,
        });
        (response, entry)
    }

    /// One completion; transient failures are retried with exponential
    /// backoff up to `retry.max_attempts`, other failures are not.
    pub fn complete(&self, prompt: &str, spec: &ModelSpec, run_index: u32) -> Result<ModelResponse, GatewayError> {
        let provider = self.provider(spec)?;
        let (result, entry) = self.call(provider.as_ref(), prompt, spec, run_index, 0);
        self.log.lock().expect("log lock").push(entry);
        result
    }

    /// Sends every chunk `n` times. Requests run concurrently up to
    /// `max_in_flight`; results and log lines come back in (chunk, run)
    /// order regardless of completion order.
    pub fn run_repeated(&self, bundle: &PromptBundle, spec: &ModelSpec, n: u32) -> Result<RepeatedRun, GatewayError> {
        if n == 0 {
            return Err(GatewayError::Config("repetition count must be at least 1".into()));
        }
        let provider = self.provider(spec)?;
        let jobs: Vec<(usize, u32)> =
            (0..bundle.chunks.len()).flat_map(|c| (0..n).map(move |r| (c, r))).collect();
        let slots: Vec<Slot> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.min(jobs.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&(chunk, run)) = jobs.get(i) else { break };
                    let out = self.call(provider.as_ref(), &bundle.chunks[chunk], spec, run, chunk);
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });

        let mut out = RepeatedRun::default();
        let mut log = self.log.lock().expect("log lock");
        for (slot, &(chunk_index, run_index)) in slots.into_iter().zip(&jobs) {
            let (result, entry) = slot.into_inner().expect("slot lock").expect("every job ran");
            log.push(entry);
            match result {
                Ok(r) => out.responses.push(r),
                Err(e) => out.failures.push(RunFailure { chunk_index, run_index, error: e.to_string() }),
            }
        }
        drop(log);
        if out.responses.is_empty() {
            return Err(GatewayError::AllRunsFailed { failures: out.failures });
        }
        Ok(out)
    }

    /// Log lines recorded so far, in request order.
    pub fn log_entries(&self) -> Vec<RunLogEntry> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn take_log(&self) -> Vec<RunLogEntry> {
        std::mem::take(&mut *self.log.lock().expect("log lock"))
    }
}

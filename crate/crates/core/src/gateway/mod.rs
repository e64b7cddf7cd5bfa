//! Completion gateway: one interface over live, replay and mock backends,
//! with caching, retries, rate limiting and bounded concurrency.

mod backend;
mod clock;
mod limit;
mod store;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    chat_request_body, parse_chat_response, Backend, BackendError, BackendReply, LiveBackend,
    MockBackend, MockRule, MockScript, ReplayBackend,
};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use limit::{Permit, RateLimiter, Semaphore};
pub use store::{FixtureEntry, FixtureStore};

use crate::parallel::ordered_map;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no recorded completion for digest {digest}")]
    ReplayMiss { digest: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: String,
        status: Option<u16>,
    },
    #[error("backend rejected the request: {0}")]
    Rejected(String),
    #[error("fixture for digest {digest} already recorded with different text")]
    FixtureConflict { digest: String },
    #[error("cannot record a completion that did not finish normally ({0:?})")]
    Unfinished(FinishReason),
    #[error("fixture store: {message}")]
    Store { message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> GatewayError {
        GatewayError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes repeated samples of the same prompt.
    pub sample_index: u32,
}

impl CompletionRequest {
    pub fn new(
        model: impl Into<String>,
        prompt_text: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
        sample_index: u32,
    ) -> CompletionRequest {
        CompletionRequest {
            model: model.into(),
            prompt_text: prompt_text.into(),
            temperature,
            max_tokens,
            sample_index,
        }
    }

    /// sha256 over (model, prompt, temperature, sample index).
    pub fn digest(&self) -> String {
        let key = serde_json::to_string(&(
            &self.model,
            &self.prompt_text,
            self.temperature,
            self.sample_index,
        ))
        .expect("tuple serializes");
        hex::encode(Sha256::digest(key.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub attempts: u32,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (1-based): initial * 2^(n-1), capped.
    pub fn backoff(&self, n: u32) -> Duration {
        let factor = 1u32.checked_shl(n.saturating_sub(1)).unwrap_or(u32::MAX);
        self.initial_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

pub struct GatewayBuilder {
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    rate_limit: Option<usize>,
    max_in_flight: usize,
    cache: Option<FixtureStore>,
    recorder: Option<FixtureStore>,
}

impl GatewayBuilder {
    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Requests per minute across all callers.
    pub fn rate_limit(mut self, per_minute: Option<usize>) -> Self {
        self.rate_limit = per_minute;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n;
        self
    }

    /// Persistent cache consulted before the backend.
    pub fn cache(mut self, store: FixtureStore) -> Self {
        self.cache = Some(store);
        self
    }

    /// Records every finished backend completion for later replay.
    pub fn recorder(mut self, store: FixtureStore) -> Self {
        self.recorder = Some(store);
        self
    }

    pub fn build(self) -> Result<Gateway, GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.retry.max_attempts == 0 {
            return Err(GatewayError::Config(
                "max_attempts must be at least 1".into(),
            ));
        }
        if self.rate_limit == Some(0) {
            return Err(GatewayError::Config(
                "rate limit must be at least 1 request per minute".into(),
            ));
        }
        Ok(Gateway {
            limiter: self
                .rate_limit
                .map(|n| RateLimiter::new(n, self.clock.clone())),
            semaphore: Semaphore::new(self.max_in_flight),
            backend: self.backend,
            clock: self.clock,
            retry: self.retry,
            max_in_flight: self.max_in_flight,
            memo: Mutex::new(HashMap::new()),
            cache: self.cache.unwrap_or_default(),
            recorder: self.recorder,
            digest_locks: Mutex::new(HashMap::new()),
        })
    }
}

/// Shared completion front end. Safe to use from many threads.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    semaphore: Semaphore,
    max_in_flight: usize,
    memo: Mutex<HashMap<String, String>>,
    cache: FixtureStore,
    recorder: Option<FixtureStore>,
    digest_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn builder(backend: Arc<dyn Backend>) -> GatewayBuilder {
        GatewayBuilder {
            backend,
            clock: Arc::new(SystemClock::new()),
            retry: RetryPolicy::default(),
            rate_limit: None,
            max_in_flight: 8,
            cache: None,
            recorder: None,
        }
    }

    pub fn new(backend: Arc<dyn Backend>) -> Gateway {
        Gateway::builder(backend)
            .build()
            .expect("default configuration is valid")
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn recorder(&self) -> Option<&FixtureStore> {
        self.recorder.as_ref()
    }

    pub fn limiter(&self) -> Option<&RateLimiter> {
        self.limiter.as_ref()
    }

    fn cached(&self, digest: &str) -> Option<String> {
        if let Some(t) = self.memo.lock().unwrap().get(digest) {
            return Some(t.clone());
        }
        self.cache.get(digest)
    }

    fn digest_lock(&self, digest: &str) -> Arc<Mutex<()>> {
        self.digest_locks
            .lock()
            .unwrap()
            .entry(digest.to_string())
            .or_default()
            .clone()
    }

    fn hit(&self, text: String, started: Duration) -> CompletionResponse {
        CompletionResponse {
            text,
            finish_reason: FinishReason::Stop,
            latency_ms: self.clock.now().saturating_sub(started).as_millis() as u64,
            attempts: 1,
            from_cache: true,
        }
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let started = self.clock.now();
        let digest = req.digest();
        if let Some(text) = self.cached(&digest) {
            return Ok(self.hit(text, started));
        }
        // One backend call per digest even when callers race.
        let lock = self.digest_lock(&digest);
        let _guard = lock.lock().unwrap();
        if let Some(text) = self.cached(&digest) {
            return Ok(self.hit(text, started));
        }
        let _permit = self.semaphore.acquire();
        let mut attempts = 0;
        loop {
            attempts += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let t0 = self.clock.now();
            match self.backend.complete(req) {
                Ok(reply) => {
                    let latency_ms = self.clock.now().saturating_sub(t0).as_millis() as u64;
                    if reply.finish_reason == FinishReason::Stop {
                        self.remember(req, &digest, &reply.text)?;
                    }
                    return Ok(CompletionResponse {
                        text: reply.text,
                        finish_reason: reply.finish_reason,
                        latency_ms,
                        attempts,
                        from_cache: false,
                    });
                }
                Err(BackendError::Miss { digest }) => {
                    return Err(GatewayError::ReplayMiss { digest })
                }
                Err(e) if e.is_transient() && attempts < self.retry.max_attempts => {
                    let wait = self.retry.backoff(attempts);
                    log::warn!("attempt {attempts} failed ({e}); retrying in {wait:?}");
                    self.clock.sleep(wait);
                }
                Err(e) if e.is_transient() => {
                    return Err(GatewayError::Exhausted {
                        attempts,
                        status: e.status(),
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(GatewayError::Rejected(e.to_string())),
            }
        }
    }

    fn remember(
        &self,
        req: &CompletionRequest,
        digest: &str,
        text: &str,
    ) -> Result<(), GatewayError> {
        self.memo
            .lock()
            .unwrap()
            .insert(digest.to_string(), text.to_string());
        if self.cache.path().is_some() {
            self.cache.insert(FixtureEntry::new(req, text))?;
        }
        if let Some(rec) = &self.recorder {
            rec.insert(FixtureEntry::new(req, text))?;
        }
        Ok(())
    }

    /// Completes every request; results stay aligned with `reqs`.
    pub fn complete_batch(
        &self,
        reqs: &[CompletionRequest],
        max_in_flight: usize,
    ) -> Vec<Result<CompletionResponse, GatewayError>> {
        ordered_map(reqs, max_in_flight.max(1), |_, r| self.complete(r))
    }
}

/// Appends a replayable entry for a finished completion.
pub fn record_fixture(
    store: &FixtureStore,
    req: &CompletionRequest,
    resp: &CompletionResponse,
) -> Result<FixtureEntry, GatewayError> {
    if resp.finish_reason != FinishReason::Stop {
        return Err(GatewayError::Unfinished(resp.finish_reason));
    }
    let entry = FixtureEntry::new(req, resp.text.clone());
    store.insert(entry.clone())?;
    Ok(entry)
}

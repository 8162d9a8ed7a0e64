use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use ureq::Agent;

use super::protocol::{
    ErrorResponse, MetaResponse, PredictRequest, PredictResponse, META_PATH, PREDICT_PATH,
};
use crate::error::{Error, Result};
use crate::types::{
    validate_distribution, LabelSet, Predictor, PredictorHandle, PredictorKind,
    ProbabilityDistribution,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(200);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Payload excerpts in errors are cut to this many bytes.
const PAYLOAD_EXCERPT: usize = 2048;

/// Client-side settings for one endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
    /// Lowers the server's advertised batch limit when set.
    pub max_batch: Option<usize>,
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: DEFAULT_TIMEOUT,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            backoff: DEFAULT_BACKOFF,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            max_batch: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = Some(max_batch);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n;
        self
    }

    pub fn with_retries(mut self, max_attempts: u32, backoff: Duration) -> Self {
        self.max_attempts = max_attempts;
        self.backoff = backoff;
        self
    }

    fn agent(&self) -> Agent {
        Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into()
    }
}

/// In-memory `(model name, text) -> distribution` store, shareable across
/// predictors and threads.
#[derive(Debug, Default)]
pub struct PredictionCache {
    entries: Mutex<HashMap<(String, String), ProbabilityDistribution>>,
}

impl PredictionCache {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn get(&self, model: &str, text: &str) -> Option<ProbabilityDistribution> {
        let entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        entries.get(&(model.to_string(), text.to_string())).cloned()
    }

    pub fn insert(&self, model: &str, text: &str, dist: ProbabilityDistribution) {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        entries.insert((model.to_string(), text.to_string()), dist);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A handshaken endpoint usable as a [`Predictor`].
#[derive(Debug)]
pub struct RemotePredictor {
    endpoint: RemoteEndpoint,
    agent: Agent,
    handle: PredictorHandle,
    max_batch: usize,
    cache: Option<Arc<PredictionCache>>,
    requests: AtomicUsize,
}

fn excerpt(payload: &str) -> String {
    if payload.len() <= PAYLOAD_EXCERPT {
        return payload.to_string();
    }
    let mut end = PAYLOAD_EXCERPT;
    while !payload.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &payload[..end])
}

/// Outcome of one HTTP exchange, before retry policy is applied.
enum Attempt {
    Done(u16, String),
    Transient(String),
}

fn exchange(agent: &Agent, url: &str, body: Option<&str>) -> Attempt {
    let response = match body {
        None => agent.get(url).call(),
        Some(b) => agent
            .post(url)
            .header("content-type", "application/json")
            .send(b),
    };
    match response {
        Ok(mut r) => {
            let status = r.status().as_u16();
            match r
                .body_mut()
                .with_config()
                .limit(256 * 1024 * 1024)
                .read_to_string()
            {
                Ok(text) => Attempt::Done(status, text),
                Err(e) => Attempt::Transient(format!("reading response body: {e}")),
            }
        }
        Err(e) => Attempt::Transient(e.to_string()),
    }
}

fn is_transient_status(status: u16) -> bool {
    matches!(status, 502..=504)
}

impl RemoteEndpoint {
    /// Performs one logical request with retry and backoff. Returns the
    /// status and body of the final non-transient answer.
    fn request(
        &self,
        agent: &Agent,
        path: &str,
        body: Option<&str>,
    ) -> std::result::Result<(u16, String), (u32, String)> {
        let url = format!("{}{path}", self.base_url);
        let attempts = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match exchange(agent, &url, body) {
                Attempt::Done(status, text) if !is_transient_status(status) => {
                    return Ok((status, text))
                }
                Attempt::Done(status, text) => {
                    last = format!("status {status}: {}", excerpt(&text))
                }
                Attempt::Transient(msg) => last = msg,
            }
            if attempt < attempts {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
        }
        Err((attempts, last))
    }
}

fn remote_error(endpoint: &str, status: u16, body: &str) -> Error {
    let message = serde_json::from_str::<ErrorResponse>(body)
        .map(|e| e.error)
        .unwrap_or_else(|_| excerpt(body));
    Error::Remote {
        endpoint: endpoint.to_string(),
        status,
        message,
    }
}

/// Fetches `/v1/meta` and builds a remote predictor handle.
pub fn handshake(endpoint: &RemoteEndpoint) -> Result<RemotePredictor> {
    let agent = endpoint.agent();
    let fail = |message: String| Error::Handshake {
        endpoint: endpoint.base_url.clone(),
        message,
    };
    let (status, body) = endpoint.request(&agent, META_PATH, None).map_err(|(attempts, msg)| {
        fail(format!(
            "{msg} (gave up after {attempts} attempt(s); check that the server is running and the URL is right, or raise --timeout-s)"
        ))
    })?;
    if status != 200 {
        return Err(fail(format!(
            "{META_PATH} answered {status}: {}",
            excerpt(&body)
        )));
    }
    let meta: MetaResponse = serde_json::from_str(&body).map_err(|e| {
        fail(format!(
            "malformed {META_PATH} payload ({e}): {}",
            excerpt(&body)
        ))
    })?;
    if meta.labels.is_empty() {
        return Err(fail("server advertises no labels".into()));
    }
    let labels = LabelSet::new(meta.labels.iter().cloned()).map_err(|e| fail(e.to_string()))?;
    if meta.name.is_empty() {
        return Err(fail("server advertises an empty model name".into()));
    }
    if meta.mask_token.is_empty() {
        return Err(fail("server advertises an empty mask token".into()));
    }
    if meta.max_batch == 0 {
        return Err(fail("server advertises max_batch 0".into()));
    }
    let max_batch = endpoint
        .max_batch
        .map_or(meta.max_batch, |m| m.clamp(1, meta.max_batch));
    Ok(RemotePredictor {
        endpoint: endpoint.clone(),
        agent,
        handle: PredictorHandle {
            name: meta.name,
            mask_token: meta.mask_token,
            label_set: labels,
            kind: PredictorKind::Remote,
        },
        max_batch,
        cache: None,
        requests: AtomicUsize::new(0),
    })
}

impl RemotePredictor {
    pub fn with_cache(mut self, cache: Arc<PredictionCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    /// `/v1/predict` requests issued so far, retries excluded.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn violation(&self, message: String, payload: &str) -> Error {
        Error::ProtocolViolation {
            endpoint: self.endpoint.base_url.clone(),
            message,
            payload: excerpt(payload),
        }
    }

    /// One `/v1/predict` round trip for at most `max_batch` texts.
    fn predict_chunk(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        let body = serde_json::to_string(&PredictRequest {
            texts: texts.to_vec(),
        })?;
        self.requests.fetch_add(1, Ordering::Relaxed);
        let (status, payload) = self
            .endpoint
            .request(&self.agent, PREDICT_PATH, Some(&body))
            .map_err(|(attempts, message)| Error::Transport {
                endpoint: self.endpoint.base_url.clone(),
                attempts,
                message,
            })?;
        if status != 200 {
            return Err(remote_error(&self.endpoint.base_url, status, &payload));
        }
        let response: PredictResponse = serde_json::from_str(&payload).map_err(|e| {
            self.violation(format!("malformed {PREDICT_PATH} payload: {e}"), &payload)
        })?;
        if response.probs.len() != texts.len() {
            return Err(self.violation(
                format!("{} rows for {} texts", response.probs.len(), texts.len()),
                &payload,
            ));
        }
        let n_labels = self.handle.label_set.len();
        response
            .probs
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let dist = ProbabilityDistribution::new(row);
                validate_distribution(&dist, n_labels)
                    .map_err(|v| self.violation(format!("row {i}: {v}"), &payload))?;
                Ok(dist)
            })
            .collect()
    }

    /// Sends `texts` in chunks of at most `max_batch`, with up to
    /// `max_in_flight` chunks outstanding; output follows input order.
    fn predict_uncached(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        let chunks: Vec<&[String]> = texts.chunks(self.max_batch).collect();
        let workers = self.endpoint.max_in_flight.clamp(1, chunks.len().max(1));
        if workers == 1 {
            let mut out = Vec::with_capacity(texts.len());
            for chunk in chunks {
                out.extend(self.predict_chunk(chunk)?);
            }
            return Ok(out);
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Vec<ProbabilityDistribution>>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(i) else { break };
                    let result = self.predict_chunk(chunk);
                    let failed = result.is_err();
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
                    if failed {
                        // Stop handing out new chunks; in-flight ones finish.
                        next.store(chunks.len(), Ordering::Relaxed);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
                Some(result) => out.extend(result?),
                None => unreachable!("a chunk was skipped without an earlier failure"),
            }
        }
        Ok(out)
    }
}

/// Distributions for `texts` from a handshaken endpoint. An empty list
/// sends no request.
pub fn remote_predict(
    predictor: &RemotePredictor,
    texts: &[String],
) -> Result<Vec<ProbabilityDistribution>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let Some(cache) = &predictor.cache else {
        return predictor.predict_uncached(texts);
    };
    let name = &predictor.handle.name;
    let mut out: Vec<Option<ProbabilityDistribution>> =
        texts.iter().map(|t| cache.get(name, t)).collect();
    let mut misses: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (text, hit) in texts.iter().zip(&out) {
        if hit.is_none() && seen.insert(text.as_str()) {
            misses.push(text.clone());
        }
    }
    if !misses.is_empty() {
        let fetched = predictor.predict_uncached(&misses)?;
        for (text, dist) in misses.iter().zip(fetched) {
            cache.insert(name, text, dist);
        }
        for (slot, text) in out.iter_mut().zip(texts) {
            if slot.is_none() {
                *slot = cache.get(name, text);
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|d| d.expect("filled from cache"))
        .collect())
}

impl Predictor for RemotePredictor {
    fn handle(&self) -> &PredictorHandle {
        &self.handle
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        remote_predict(self, texts)
    }
}

/// Skips the cache; used by probes that must observe the server directly.
pub(crate) fn predict_direct(
    predictor: &RemotePredictor,
    texts: &[String],
) -> Result<Vec<ProbabilityDistribution>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    predictor.predict_uncached(texts)
}

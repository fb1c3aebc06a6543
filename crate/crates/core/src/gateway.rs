//! Chat-completion gateway with a record/replay response cache.
//!
//! Requests are identified by a fingerprint over model id, prompt, run
//! index and sampling overrides. In `record` mode live answers are written
//! to the cache; in `replay` mode only the cache is consulted, so whole
//! experiments can be re-scored offline.
//!
//! Cache layout (version 1):
//!
//! ```text
//! <dir>/index.tsv             header line, then fingerprint<TAB>model<TAB>run<TAB>bytes
//! <dir>/records/<fp>.txt      raw response text
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CACHE_INDEX_HEADER: &str = "# lemmata response cache v1";
const FINGERPRINT_SCHEME: &str = "lemmata-request/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("environment variable {0} is not set")]
    Credentials(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("unexpected response body: {0}")]
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network(_) => true,
            TransportError::Credentials(_) | TransportError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("request failed after {attempts} attempt(s): {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("no cached response for fingerprint {0}")]
    CacheMiss(String),
    #[error("cache: {0}")]
    Cache(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Request-body overrides such as `temperature`; empty means provider defaults.
    #[serde(default)]
    pub sampling: BTreeMap<String, Value>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_retries() -> u32 {
    4
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        ProviderConfig {
            base_url: base_url.into(),
            model_id: model_id.into(),
            api_key_env: api_key_env.into(),
            sampling: BTreeMap::new(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    /// Always call the endpoint; nothing is cached.
    Live,
    /// Serve cached answers when present, otherwise call and persist.
    Record,
    /// Cache only; a miss is an error.
    #[default]
    Replay,
}

impl std::fmt::Display for CacheMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CacheMode::Live => "live",
            CacheMode::Record => "record",
            CacheMode::Replay => "replay",
        })
    }
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(CacheMode::Live),
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            other => Err(format!("unknown cache mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Live,
    Cache,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlmResponse {
    pub raw_text: String,
    pub request_fingerprint: String,
    pub latency: Duration,
    pub origin: Origin,
}

/// Everything that identifies one request.
#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest<'a> {
    pub model_id: &'a str,
    pub prompt: &'a str,
    pub run_index: usize,
    pub sampling: &'a BTreeMap<String, Value>,
}

impl ChatRequest<'_> {
    /// Hex SHA-256 over a length-prefixed canonical encoding of the request.
    pub fn fingerprint(&self) -> String {
        let sampling = serde_json::to_string(self.sampling).expect("json values serialize");
        let mut h = Sha256::new();
        for part in [FINGERPRINT_SCHEME, self.model_id, &self.run_index.to_string(), &sampling, self.prompt] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn body(&self) -> Value {
        let mut body = json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": self.prompt}],
        });
        let obj = body.as_object_mut().expect("object literal");
        for (k, v) in self.sampling {
            obj.insert(k.clone(), v.clone());
        }
        body
    }
}

/// One attempt at a chat completion. Retries are handled by [`Gateway`].
pub trait ChatTransport: Send + Sync {
    fn send(&self, config: &ProviderConfig, request: &ChatRequest<'_>) -> Result<String, TransportError>;
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, config: &ProviderConfig, request: &ChatRequest<'_>) -> Result<String, TransportError> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| TransportError::Credentials(config.api_key_env.clone()))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let response = self
            .client
            .post(url)
            .bearer_auth(key)
            .timeout(config.timeout())
            .json(&request.body())
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        extract_content(&text)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions response body.
pub fn extract_content(body: &str) -> Result<String, TransportError> {
    let value: Value = serde_json::from_str(body).map_err(|e| TransportError::Decode(e.to_string()))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))
}

/// Append-only on-disk store of raw responses keyed by request fingerprint.
pub struct ResponseCache {
    dir: PathBuf,
    known: RwLock<HashSet<String>>,
    append: Mutex<()>,
}

impl ResponseCache {
    /// Opens the cache at `dir`. A missing directory is an empty cache; it is
    /// created on the first insert.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        let index = dir.join("index.tsv");
        let mut known = HashSet::new();
        if index.exists() {
            let text = fs::read_to_string(&index).map_err(|e| GatewayError::Cache(e.to_string()))?;
            let mut lines = text.lines();
            if lines.next() != Some(CACHE_INDEX_HEADER) {
                return Err(GatewayError::Cache(format!("{} has no version header", index.display())));
            }
            for line in lines.filter(|l| !l.is_empty()) {
                let fp = line.split('\t').next().unwrap_or_default();
                known.insert(fp.to_string());
            }
        }
        Ok(ResponseCache {
            dir,
            known: RwLock::new(known),
            append: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.known.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record_path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join("records").join(format!("{fingerprint}.txt"))
    }

    pub fn get(&self, fingerprint: &str) -> Result<Option<String>, GatewayError> {
        if !self.known.read().expect("cache lock").contains(fingerprint) {
            return Ok(None);
        }
        fs::read_to_string(self.record_path(fingerprint))
            .map(Some)
            .map_err(|e| GatewayError::Cache(format!("record {fingerprint}: {e}")))
    }

    pub fn insert(&self, request: &ChatRequest<'_>, text: &str) -> Result<(), GatewayError> {
        let fingerprint = request.fingerprint();
        let _guard = self.append.lock().expect("cache lock");
        if self.known.read().expect("cache lock").contains(&fingerprint) {
            return Ok(());
        }
        let io = |e: std::io::Error| GatewayError::Cache(e.to_string());
        fs::create_dir_all(self.dir.join("records")).map_err(io)?;
        let path = self.record_path(&fingerprint);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        let index = self.dir.join("index.tsv");
        let fresh = !index.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(&index).map_err(io)?;
        if fresh {
            writeln!(f, "{CACHE_INDEX_HEADER}").map_err(io)?;
        }
        writeln!(f, "{fingerprint}\t{}\t{}\t{}", request.model_id, request.run_index, text.len()).map_err(io)?;
        self.known.write().expect("cache lock").insert(fingerprint);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    /// Exponential backoff with jitter in [50%, 100%] of the nominal delay.
    pub fn delay(&self, attempt: u32) -> Duration {
        let nominal = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(attempt))
            .min(self.max_delay);
        nominal.mul_f64(rand::rng().random_range(0.5..=1.0))
    }
}

pub struct Gateway {
    config: ProviderConfig,
    mode: CacheMode,
    transport: Arc<dyn ChatTransport>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    live_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(
        config: ProviderConfig,
        mode: CacheMode,
        transport: Arc<dyn ChatTransport>,
        cache: Option<ResponseCache>,
    ) -> Result<Self, GatewayError> {
        if mode != CacheMode::Live && cache.is_none() {
            return Err(GatewayError::Cache(format!("{mode} mode needs a cache directory")));
        }
        let retry = RetryPolicy {
            max_retries: config.max_retries,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        };
        Ok(Gateway {
            config,
            mode,
            transport,
            cache,
            retry,
            live_calls: AtomicUsize::new(0),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    /// Number of transport attempts made so far.
    pub fn live_calls(&self) -> usize {
        self.live_calls.load(Ordering::SeqCst)
    }

    pub fn request<'a>(&'a self, prompt: &'a str, run_index: usize) -> ChatRequest<'a> {
        ChatRequest {
            model_id: &self.config.model_id,
            prompt,
            run_index,
            sampling: &self.config.sampling,
        }
    }

    fn call_with_retries(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            self.live_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(&self.config, request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    warn!("attempt {} for {} failed ({e}); retrying in {delay:?}", attempt + 1, self.config.model_id);
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(source) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt + 1,
                        source,
                    })
                }
            }
        }
    }

    pub fn complete(&self, prompt: &str, run_index: usize) -> Result<LlmResponse, GatewayError> {
        let request = self.request(prompt, run_index);
        let fingerprint = request.fingerprint();
        let start = Instant::now();
        if let (CacheMode::Record | CacheMode::Replay, Some(cache)) = (self.mode, &self.cache) {
            if let Some(raw_text) = cache.get(&fingerprint)? {
                debug!("cache hit {fingerprint}");
                return Ok(LlmResponse {
                    raw_text,
                    request_fingerprint: fingerprint,
                    latency: start.elapsed(),
                    origin: Origin::Cache,
                });
            }
            if self.mode == CacheMode::Replay {
                return Err(GatewayError::CacheMiss(fingerprint));
            }
        }
        let raw_text = self.call_with_retries(&request)?;
        if let (CacheMode::Record, Some(cache)) = (self.mode, &self.cache) {
            cache.insert(&request, &raw_text)?;
        }
        Ok(LlmResponse {
            raw_text,
            request_fingerprint: fingerprint,
            latency: start.elapsed(),
            origin: Origin::Live,
        })
    }

    /// Runs every prompt `runs` times with at most `parallelism` requests in
    /// flight. The result is indexed `[run][prompt]` in input order; failures
    /// stay in place as `Err` entries.
    pub fn run_batch(
        &self,
        prompts: &[String],
        runs: usize,
        parallelism: usize,
    ) -> Vec<Vec<Result<LlmResponse, GatewayError>>> {
        let total = prompts.len() * runs;
        let slots: Vec<Mutex<Option<Result<LlmResponse, GatewayError>>>> =
            (0..total).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = parallelism.max(1).min(total.max(1));
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let item = next.fetch_add(1, Ordering::SeqCst);
                    if item >= total {
                        break;
                    }
                    let (run, idx) = (item / prompts.len(), item % prompts.len());
                    let result = self.complete(&prompts[idx], run);
                    *slots[item].lock().expect("slot lock") = Some(result);
                });
            }
        });
        let mut flat = slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every item processed"));
        (0..runs)
            .map(|_| flat.by_ref().take(prompts.len()).collect())
            .collect()
    }
}

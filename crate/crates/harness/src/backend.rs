//! Model access: HTTP inference with retries, the scripted reviewer, an
//! on-disk response cache and a per-backend cap on requests in flight.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use peer_eval_core::hash::{derive_seed, hash_parts};
use peer_eval_core::scripted::{prompt_rng, scripted_judge, GoldHint, ScriptedConfig, ScriptedJob};
use peer_eval_core::PromptSetting;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("auth variable `{0}` is not set")]
    MissingAuth(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("cache entry {path}: {message}")]
    Cache { path: String, message: String },
    #[error("backend `{0}`: {1}")]
    InvalidSpec(String, String),
    #[error("unknown backend `{0}`")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
}

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    2
}
fn default_in_flight() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    256
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Model name sent in the request body; defaults to the backend id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub request_timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// First retry delay; doubles on every further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripted_config: Option<ScriptedConfig>,
}

impl BackendSpec {
    pub fn http(backend_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            kind: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            model: None,
            auth_env_var: None,
            request_timeout: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            max_tokens: default_max_tokens(),
            backoff_ms: default_backoff_ms(),
            scripted_config: None,
        }
    }

    pub fn scripted(backend_id: impl Into<String>, config: ScriptedConfig) -> Self {
        Self {
            kind: BackendKind::Scripted,
            endpoint: None,
            scripted_config: Some(config),
            ..Self::http(backend_id, "")
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |msg: &str| Err(BackendError::InvalidSpec(self.backend_id.clone(), msg.to_string()));
        if self.backend_id.is_empty() {
            return bad("empty backend_id");
        }
        if self.request_timeout.is_nan() || self.request_timeout <= 0.0 {
            return bad("request_timeout must be positive");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        match self.kind {
            BackendKind::Http if self.endpoint.as_deref().is_none_or(str::is_empty) => bad("http backends need an endpoint"),
            BackendKind::Scripted => match &self.scripted_config {
                None => bad("scripted backends need scripted_config"),
                Some(c) => c
                    .validate()
                    .map_err(|e| BackendError::InvalidSpec(self.backend_id.clone(), e.to_string())),
            },
            BackendKind::Http => Ok(()),
        }
    }
}

/// What a judging call is about, for backends that simulate a judge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JudgeContext {
    pub task_id: String,
    pub setting: PromptSetting,
    pub subject_ids: Vec<String>,
    pub gold: Option<GoldHint>,
}

#[derive(Clone, Copy, Debug)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    /// Separates cache entries of different stages and settings.
    pub namespace: &'a str,
    /// Present for judging calls, absent for generation.
    pub context: Option<&'a JudgeContext>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
    /// Seconds; zero when served from cache.
    pub latency: f64,
    #[serde(skip)]
    pub from_cache: bool,
}

pub trait Backend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;

    /// Cache-key material beyond the prompt, for backends whose reply depends
    /// on more than the prompt text.
    fn cache_context(&self, _request: &CompletionRequest<'_>) -> Option<String> {
        None
    }
}

/// Sends a JSON body and returns `(status, body)`; `Err` is a transport
/// failure (connection refused, timeout) and is retried.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<(u16, String), String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Transport for UreqTransport {
    fn post(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<(u16, String), String> {
        let mut request = self.agent.post(url).header("content-type", "application/json");
        if let Some(token) = bearer {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let mut response = request.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct ResponseBody {
    text: String,
}

pub struct HttpBackend {
    spec: BackendSpec,
    transport: Arc<dyn Transport>,
    sleep: fn(Duration),
}

impl HttpBackend {
    pub fn new(spec: BackendSpec) -> Result<Self, BackendError> {
        let timeout = Duration::from_secs_f64(spec.request_timeout);
        Self::with_transport(spec, Arc::new(UreqTransport::new(timeout)))
    }

    pub fn with_transport(spec: BackendSpec, transport: Arc<dyn Transport>) -> Result<Self, BackendError> {
        spec.validate()?;
        Ok(Self {
            spec,
            transport,
            sleep: std::thread::sleep,
        })
    }

    /// Replaces the sleep used between retries.
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << retry.min(16);
        Duration::from_millis(self.spec.backoff_ms.saturating_mul(factor)).min(Duration::from_secs(60))
    }
}

impl Backend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.spec.backend_id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let token = match &self.spec.auth_env_var {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingAuth(var.clone()))?),
            None => None,
        };
        let body = serde_json::to_string(&RequestBody {
            model: self.spec.model.as_deref().unwrap_or(&self.spec.backend_id),
            prompt: request.prompt,
            max_tokens: self.spec.max_tokens,
            temperature: 0.0,
        })
        .expect("request body serializes");
        let url = self.spec.endpoint.as_deref().unwrap_or_default();
        let attempts = self.spec.max_retries + 1;
        let start = Instant::now();
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.transport.post(url, token.as_deref(), &body) {
                Ok((200..=299, text)) => {
                    let parsed: ResponseBody =
                        serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
                    return Ok(Completion {
                        text: parsed.text,
                        attempts: attempt,
                        latency: start.elapsed().as_secs_f64(),
                        from_cache: false,
                    });
                }
                Ok((status, _)) if status == 429 || status >= 500 => last = format!("HTTP status {status}"),
                Ok((status, text)) => {
                    return Err(BackendError::Status {
                        status,
                        body: text.chars().take(200).collect(),
                    })
                }
                Err(e) => last = e,
            }
            if attempt < attempts {
                (self.sleep)(self.backoff(attempt - 1));
            }
        }
        Err(BackendError::Exhausted { attempts, last })
    }

    fn cache_context(&self, _request: &CompletionRequest<'_>) -> Option<String> {
        Some(format!(
            "{}|{}",
            self.spec.model.as_deref().unwrap_or(&self.spec.backend_id),
            self.spec.max_tokens
        ))
    }
}

/// Deterministic stand-in model. Judging calls answer through
/// [`scripted_judge`]; generation calls return a fixed pseudo-random text.
/// Every answer depends only on the seed, the prompt and the judging context.
pub struct ScriptedBackend {
    backend_id: String,
    config: ScriptedConfig,
}

impl ScriptedBackend {
    /// `master_seed` is mixed into the configured seed so one run seed moves
    /// every scripted backend at once.
    pub fn new(backend_id: impl Into<String>, config: ScriptedConfig, master_seed: u64) -> Self {
        let backend_id = backend_id.into();
        let mut config = config;
        config.seed = derive_seed(master_seed, &format!("scripted/{backend_id}/{}", config.seed));
        Self { backend_id, config }
    }
}

impl Backend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let mut rng = prompt_rng(self.config.seed, request.prompt);
        let text = match request.context {
            Some(ctx) => {
                let job = ScriptedJob {
                    task_id: &ctx.task_id,
                    setting: ctx.setting,
                    subject_ids: &ctx.subject_ids,
                    gold: ctx.gold,
                };
                scripted_judge(&self.config, &job, &mut rng).raw_text
            }
            None => format!("{} response {:016x}", self.backend_id, rng.random::<u64>()),
        };
        Ok(Completion {
            text,
            attempts: 1,
            latency: 0.0,
            from_cache: false,
        })
    }

    fn cache_context(&self, request: &CompletionRequest<'_>) -> Option<String> {
        let ctx = request.context.map(|c| serde_json::to_string(c).expect("context serializes"));
        Some(format!("{}|{}", self.config.seed, ctx.unwrap_or_default()))
    }
}

struct Semaphore {
    free: Mutex<usize>,
    ready: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.ready.wait(free).unwrap();
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.ready.notify_one();
    }
}

/// Caps requests in flight and counts calls that reach the model.
pub struct Limited {
    inner: Box<dyn Backend>,
    slots: Semaphore,
    calls: AtomicU64,
    peak: AtomicU64,
    active: AtomicU64,
}

impl Limited {
    pub fn new(inner: Box<dyn Backend>, max_in_flight: usize) -> Self {
        Self {
            inner,
            slots: Semaphore {
                free: Mutex::new(max_in_flight.max(1)),
                ready: Condvar::new(),
            },
            calls: AtomicU64::new(0),
            peak: AtomicU64::new(0),
            active: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Largest number of simultaneous calls observed.
    pub fn peak_in_flight(&self) -> u64 {
        self.peak.load(Ordering::SeqCst)
    }
}

impl Backend for Limited {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let _slot = self.slots.acquire();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let result = self.inner.complete(request);
        self.active.fetch_sub(1, Ordering::SeqCst);
        result
    }

    fn cache_context(&self, request: &CompletionRequest<'_>) -> Option<String> {
        self.inner.cache_context(request)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    prompt: String,
    #[serde(default)]
    context: Option<String>,
    text: String,
    attempts: u32,
}

fn path_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Response cache at `<root>/<backend_id>/<namespace>/<hash>.json`, where the
/// 64-bit hash covers the prompt and the backend's cache context. Entries
/// store the full prompt, so a hash collision is a miss, not a wrong answer.
pub struct Cached {
    inner: Arc<dyn Backend>,
    root: PathBuf,
    hits: AtomicU64,
    writes: AtomicU64,
}

impl Cached {
    pub fn new(inner: Arc<dyn Backend>, root: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            root: root.into(),
            hits: AtomicU64::new(0),
            writes: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn entry_path(&self, request: &CompletionRequest<'_>) -> PathBuf {
        let context = self.inner.cache_context(request).unwrap_or_default();
        let hash = hash_parts(&[request.prompt.as_bytes(), context.as_bytes()]);
        self.root
            .join(path_safe(self.inner.backend_id()))
            .join(path_safe(request.namespace))
            .join(format!("{hash:016x}.json"))
    }

    fn read(path: &Path, prompt: &str, context: &Option<String>) -> Option<CacheEntry> {
        let text = fs::read_to_string(path).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        (entry.prompt == prompt && &entry.context == context).then_some(entry)
    }
}

impl Backend for Cached {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let path = self.entry_path(request);
        let context = self.inner.cache_context(request);
        if let Some(entry) = Self::read(&path, request.prompt, &context) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(Completion {
                text: entry.text,
                attempts: entry.attempts,
                latency: 0.0,
                from_cache: true,
            });
        }
        let completion = self.inner.complete(request)?;
        let entry = CacheEntry {
            prompt: request.prompt.to_string(),
            context,
            text: completion.text.clone(),
            attempts: completion.attempts,
        };
        let fail = |e: std::io::Error| BackendError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        fs::create_dir_all(path.parent().expect("entry has a parent")).map_err(fail)?;
        // Unique temporary name per write; rename is atomic, so concurrent
        // writers of the same entry leave one complete file.
        let n = self.writes.fetch_add(1, Ordering::SeqCst);
        let tmp = path.with_extension(format!("{}-{n}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&entry).expect("entry serializes")).map_err(fail)?;
        fs::rename(&tmp, &path).map_err(fail)?;
        Ok(completion)
    }

    fn cache_context(&self, request: &CompletionRequest<'_>) -> Option<String> {
        self.inner.cache_context(request)
    }
}

/// Backends by id, each behind its in-flight cap and, optionally, the cache.
#[derive(Default)]
pub struct BackendPool {
    backends: BTreeMap<String, Arc<dyn Backend>>,
    limiters: BTreeMap<String, Arc<Limited>>,
}

impl BackendPool {
    pub fn from_specs(specs: &[BackendSpec], master_seed: u64, cache_dir: Option<&Path>) -> Result<Self, BackendError> {
        let mut pool = Self::default();
        for spec in specs {
            spec.validate()?;
            let backend: Box<dyn Backend> = match spec.kind {
                BackendKind::Http => Box::new(HttpBackend::new(spec.clone())?),
                BackendKind::Scripted => Box::new(ScriptedBackend::new(
                    &spec.backend_id,
                    spec.scripted_config.clone().expect("validated"),
                    master_seed,
                )),
            };
            pool.insert(backend, spec.max_in_flight, cache_dir);
        }
        Ok(pool)
    }

    /// Adds a backend under its own id, replacing any earlier one.
    pub fn insert(&mut self, backend: Box<dyn Backend>, max_in_flight: usize, cache_dir: Option<&Path>) {
        let id = backend.backend_id().to_string();
        let limited = Arc::new(Limited::new(backend, max_in_flight));
        let outer: Arc<dyn Backend> = match cache_dir {
            Some(dir) => Arc::new(Cached::new(limited.clone(), dir)),
            None => limited.clone(),
        };
        self.backends.insert(id.clone(), outer);
        self.limiters.insert(id, limited);
    }

    pub fn get(&self, backend_id: &str) -> Result<&Arc<dyn Backend>, BackendError> {
        self.backends
            .get(backend_id)
            .ok_or_else(|| BackendError::Unknown(backend_id.to_string()))
    }

    pub fn contains(&self, backend_id: &str) -> bool {
        self.backends.contains_key(backend_id)
    }

    /// Calls that reached the model (cache hits excluded).
    pub fn calls(&self, backend_id: &str) -> u64 {
        self.limiters.get(backend_id).map_or(0, |l| l.calls())
    }

    pub fn total_calls(&self) -> u64 {
        self.limiters.values().map(|l| l.calls()).sum()
    }

    pub fn peak_in_flight(&self, backend_id: &str) -> u64 {
        self.limiters.get(backend_id).map_or(0, |l| l.peak_in_flight())
    }
}

//! Completion interface shared by every agent role.
//!
//! An [`LlmClient`] pairs sampling settings with a [`Backend`] (live HTTP,
//! scripted playback, or a record/replay cache around either) and keeps a
//! [`CallLedger`] of every call made through it, broken down by [`Role`].

mod cache;
mod http;
mod scripted;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheMode, CachedBackend};

/// How a prompt maps onto chat messages; stored with every run's metrics.
pub const MESSAGE_LAYOUT: &str = "system: environment preamble and action template; user: everything else";
pub use http::HttpBackend;
pub use scripted::Scripted;

/// Which part of the agent issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Action,
    Reflection,
    Summarization,
    Critique,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Action, Role::Reflection, Role::Summarization, Role::Critique];

    fn index(self) -> usize {
        match self {
            Role::Action => 0,
            Role::Reflection => 1,
            Role::Summarization => 2,
            Role::Critique => 3,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Action => "action",
            Role::Reflection => "reflection",
            Role::Summarization => "summarization",
            Role::Critique => "critique",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Base delay; attempt `n` waits `backoff_ms * 2^(n-1)`.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// Sampling and transport settings. Defaults are the deterministic decoding
/// setup used for every reported run: temperature 0, top-p 0.7, top-k 50,
/// repetition penalty 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: "scripted".to_string(),
            temperature: 0.0,
            top_p: 0.7,
            top_k: 50,
            repetition_penalty: 1.0,
            max_tokens: 512,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
            api_key_env: "LLM_API_KEY".to_string(),
        }
    }
}

impl LlmSettings {
    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |field: &'static str, reason: String| LlmError::InvalidSettings { field, reason };
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(bad("top_p", format!("{} is outside (0, 1]", self.top_p)));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(bad("temperature", format!("{} is negative", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(bad("max_tokens", "must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(bad("retry.max_attempts", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

/// A chat request split into a system block (environment description and
/// action templates) and the user remainder.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.system.trim().is_empty() && self.user.trim().is_empty()
    }

    /// Single-string view: system block, blank line, user block.
    pub fn text(&self) -> String {
        if self.system.is_empty() {
            self.user.clone()
        } else if self.user.is_empty() {
            self.system.clone()
        } else {
            format!("{}\n\n{}", self.system, self.user)
        }
    }
}

/// Stable request digest.
///
/// Canonical form: a JSON object with lexicographically sorted keys
/// `max_tokens, model, repetition_penalty, system, temperature, top_k,
/// top_p, user`, serialized compactly (no whitespace), hashed with SHA-256
/// and hex-encoded lowercase. Endpoint, timeout and retry settings do not
/// affect model output and are excluded.
pub fn request_digest(settings: &LlmSettings, prompt: &Prompt) -> String {
    let canonical = serde_json::json!({
        "max_tokens": settings.max_tokens,
        "model": settings.model,
        "repetition_penalty": settings.repetition_penalty,
        "system": prompt.system,
        "temperature": settings.temperature,
        "top_k": settings.top_k,
        "top_p": settings.top_p,
        "user": prompt.user,
    });
    let bytes = serde_json::to_vec(&canonical).expect("json value serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub settings: &'a LlmSettings,
    pub prompt: &'a Prompt,
    pub role: Role,
    pub digest: &'a str,
}

/// Anything that can turn a prompt into text. Implementations must tolerate
/// concurrent calls.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError>;
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid llm setting `{field}`: {reason}")]
    InvalidSettings { field: &'static str, reason: String },
    #[error("empty prompt for {role} call")]
    EmptyPrompt { role: Role },
    #[error("transport failure on {role} call (status {status:?}) after {attempts} attempt(s): {message}")]
    Transport {
        role: Role,
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("scripted backend exhausted on call {call}")]
    ScriptExhausted { call: usize },
    #[error("scripted backend has no response for digest {digest}")]
    ScriptMissing { digest: String },
    #[error("cache miss in replay mode for digest {digest}")]
    CacheMiss { digest: String },
    #[error("cache file {path}: line {line}: {message}")]
    CacheLoad { path: String, line: usize, message: String },
    #[error("cache io: {0}")]
    CacheIo(#[from] std::io::Error),
}

impl LlmError {
    /// Errors that indicate a harness or test misconfiguration rather than a
    /// flaky endpoint. These abort a sweep instead of being recorded per task.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, LlmError::Transport { .. } | LlmError::BadResponse(_))
    }
}

/// One completed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: Role,
    pub digest: String,
    pub response: String,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
}

/// Call counts per role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub action: u64,
    pub reflection: u64,
    pub summarization: u64,
    pub critique: u64,
}

impl RoleCounts {
    pub fn get(&self, role: Role) -> u64 {
        match role {
            Role::Action => self.action,
            Role::Reflection => self.reflection,
            Role::Summarization => self.summarization,
            Role::Critique => self.critique,
        }
    }

    pub fn total(&self) -> u64 {
        self.action + self.reflection + self.summarization + self.critique
    }

    pub fn since(&self, earlier: &RoleCounts) -> RoleCounts {
        RoleCounts {
            action: self.action - earlier.action,
            reflection: self.reflection - earlier.reflection,
            summarization: self.summarization - earlier.summarization,
            critique: self.critique - earlier.critique,
        }
    }

    pub fn add(&mut self, other: &RoleCounts) {
        self.action += other.action;
        self.reflection += other.reflection;
        self.summarization += other.summarization;
        self.critique += other.critique;
    }
}

/// Per-role counters plus the call log.
#[derive(Debug, Default)]
pub struct CallLedger {
    counts: [AtomicU64; 4],
    records: Mutex<Vec<CallRecord>>,
}

impl CallLedger {
    pub fn counts(&self) -> RoleCounts {
        let c = |r: Role| self.counts[r.index()].load(Ordering::SeqCst);
        RoleCounts {
            action: c(Role::Action),
            reflection: c(Role::Reflection),
            summarization: c(Role::Summarization),
            critique: c(Role::Critique),
        }
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().expect("ledger poisoned").clone()
    }

    pub fn records_since(&self, start: usize) -> Vec<CallRecord> {
        let records = self.records.lock().expect("ledger poisoned");
        records.get(start..).map(<[CallRecord]>::to_vec).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("ledger poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, record: CallRecord) {
        self.counts[record.role.index()].fetch_add(1, Ordering::SeqCst);
        self.records.lock().expect("ledger poisoned").push(record);
    }
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Result of one call, as seen by callers that trace.
#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub digest: String,
}

/// Settings + backend + ledger. Cheap to clone; clones share the ledger.
#[derive(Clone)]
pub struct LlmClient {
    settings: LlmSettings,
    backend: Arc<dyn Backend>,
    ledger: Arc<CallLedger>,
}

impl fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClient")
            .field("settings", &self.settings)
            .field("counts", &self.ledger.counts())
            .finish()
    }
}

impl LlmClient {
    pub fn new(settings: LlmSettings, backend: Arc<dyn Backend>) -> Result<Self, LlmError> {
        settings.validate()?;
        Ok(Self {
            settings,
            backend,
            ledger: Arc::new(CallLedger::default()),
        })
    }

    /// Client with default settings over an arbitrary backend.
    pub fn with_backend(backend: impl Backend + 'static) -> Self {
        Self::new(LlmSettings::default(), Arc::new(backend)).expect("default settings are valid")
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    pub fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    pub fn counts(&self) -> RoleCounts {
        self.ledger.counts()
    }

    pub fn complete(&self, prompt: &Prompt, role: Role) -> Result<Completion, LlmError> {
        if prompt.is_empty() {
            return Err(LlmError::EmptyPrompt { role });
        }
        let digest = request_digest(&self.settings, prompt);
        let started = Instant::now();
        let request = CompletionRequest {
            settings: &self.settings,
            prompt,
            role,
            digest: &digest,
        };
        let text = self.backend.complete(&request)?;
        self.ledger.push(CallRecord {
            role,
            digest: digest.clone(),
            response: text.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            timestamp_ms: now_ms(),
        });
        Ok(Completion { text, digest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_deterministic_decoding_setup() {
        let s = LlmSettings::default();
        assert_eq!(s.temperature, 0.0);
        assert_eq!(s.top_p, 0.7);
        assert_eq!(s.top_k, 50);
        assert_eq!(s.repetition_penalty, 1.0);
        s.validate().unwrap();
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let s = LlmSettings::default();
        let p = Prompt::new("sys", "user");
        let d1 = request_digest(&s, &p);
        assert_eq!(d1, request_digest(&s.clone(), &p.clone()));
        assert_eq!(d1.len(), 64);
        // Pinned so other implementations can share cache files.
        // Same bytes as Python json.dumps(sort_keys=True, separators=(",", ":")).
        assert_eq!(d1, "55938077c73c08ef3961f9c898f094741efbd56239312cca9c5dae650132d07f");
        let mut s2 = s.clone();
        s2.temperature = 0.5;
        assert_ne!(d1, request_digest(&s2, &p));
        assert_ne!(d1, request_digest(&s, &Prompt::new("sys", "user2")));
        let mut s3 = s.clone();
        s3.endpoint = "http://elsewhere".into();
        s3.timeout_secs = 1;
        assert_eq!(d1, request_digest(&s3, &p));
    }

    #[test]
    fn invalid_top_p_rejected() {
        let s = LlmSettings {
            top_p: 0.0,
            ..LlmSettings::default()
        };
        assert!(matches!(
            s.validate(),
            Err(LlmError::InvalidSettings { field: "top_p", .. })
        ));
    }

    #[test]
    fn empty_prompt_rejected_and_not_counted() {
        let client = LlmClient::with_backend(Scripted::queue(["x"]));
        let err = client.complete(&Prompt::default(), Role::Action).unwrap_err();
        assert!(matches!(err, LlmError::EmptyPrompt { role: Role::Action }));
        assert_eq!(client.counts().total(), 0);
    }

    #[test]
    fn counters_track_roles() {
        let client = LlmClient::with_backend(Scripted::from_fn(|_| Ok("[]".into())));
        let p = Prompt::new("", "hello");
        for _ in 0..3 {
            client.complete(&p, Role::Reflection).unwrap();
        }
        client.complete(&p, Role::Action).unwrap();
        let c = client.counts();
        assert_eq!(c.reflection, 3);
        assert_eq!(c.action, 1);
        assert_eq!(client.ledger().records().len(), 4);
    }
}

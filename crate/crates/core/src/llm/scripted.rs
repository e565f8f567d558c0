use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{Backend, CompletionRequest, LlmError};

type ResponderFn = dyn Fn(&CompletionRequest<'_>) -> Result<String, LlmError> + Send + Sync;

enum Script {
    Queue(Mutex<VecDeque<String>>),
    ByDigest(HashMap<String, String>),
    Responder(Box<ResponderFn>),
}

/// Deterministic playback backend for tests and offline runs.
///
/// Clones share the script and the call counter, so a test can keep a handle
/// after moving one into an [`LlmClient`](super::LlmClient).
#[derive(Clone)]
pub struct Scripted {
    script: Arc<Script>,
    calls: Arc<AtomicUsize>,
}

impl Scripted {
    /// Answers calls in order; call `N+1` on a queue of `N` is an error.
    pub fn queue<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::wrap(Script::Queue(Mutex::new(
            responses.into_iter().map(Into::into).collect(),
        )))
    }

    /// Answers by request digest, independent of call order.
    pub fn by_digest(map: HashMap<String, String>) -> Self {
        Self::wrap(Script::ByDigest(map))
    }

    /// Answers with an arbitrary function of the request.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&CompletionRequest<'_>) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        Self::wrap(Script::Responder(Box::new(f)))
    }

    fn wrap(script: Script) -> Self {
        Self {
            script: Arc::new(script),
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Number of calls this backend has answered (or refused).
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Responses still queued; `None` for non-queue scripts.
    pub fn remaining(&self) -> Option<usize> {
        match &*self.script {
            Script::Queue(q) => Some(q.lock().expect("script poisoned").len()),
            _ => None,
        }
    }
}

impl Backend for Scripted {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        match &*self.script {
            Script::Queue(q) => q
                .lock()
                .expect("script poisoned")
                .pop_front()
                .ok_or(LlmError::ScriptExhausted { call }),
            Script::ByDigest(map) => map.get(request.digest).cloned().ok_or_else(|| LlmError::ScriptMissing {
                digest: request.digest.to_string(),
            }),
            Script::Responder(f) => f(request),
        }
    }
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{now_ms, Backend, CallRecord, CompletionRequest, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    #[default]
    Off,
    /// Serve hits from the file, forward misses and append them.
    Record,
    /// Serve hits from the file; a miss is an error.
    Replay,
}

impl std::str::FromStr for CacheMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CacheMode::Off),
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            other => Err(format!("unknown cache mode `{other}` (expected off|record|replay)")),
        }
    }
}

/// Record/replay cache over an append-only JSON Lines file of
/// [`CallRecord`]s keyed by request digest.
pub struct CachedBackend {
    inner: Option<Arc<dyn Backend>>,
    mode: CacheMode,
    path: PathBuf,
    entries: RwLock<HashMap<String, String>>,
    file: Option<Mutex<File>>,
    hits: AtomicUsize,
    forwarded: AtomicUsize,
}

impl CachedBackend {
    /// Opens (or creates, in record mode) the cache file and indexes it.
    /// `inner` may be `None` only in replay mode.
    pub fn open(inner: Option<Arc<dyn Backend>>, path: impl AsRef<Path>, mode: CacheMode) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            load_entries(&path)?
        } else if mode == CacheMode::Replay {
            return Err(LlmError::CacheLoad {
                path: path.display().to_string(),
                line: 0,
                message: "file does not exist".into(),
            });
        } else {
            HashMap::new()
        };
        let file = match mode {
            CacheMode::Record => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(&path)?)),
            _ => None,
        };
        if mode == CacheMode::Record && inner.is_none() {
            return Err(LlmError::CacheLoad {
                path: path.display().to_string(),
                line: 0,
                message: "record mode needs an inner backend".into(),
            });
        }
        Ok(Self {
            inner,
            mode,
            path,
            entries: RwLock::new(entries),
            file,
            hits: AtomicUsize::new(0),
            forwarded: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Calls forwarded to the inner backend.
    pub fn forwarded(&self) -> usize {
        self.forwarded.load(Ordering::SeqCst)
    }

    fn append(&self, record: &CallRecord) -> Result<(), LlmError> {
        let Some(file) = &self.file else {
            return Ok(());
        };
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        // One write per record under the lock keeps lines whole for readers.
        let mut f = file.lock().expect("cache file poisoned");
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

fn load_entries(path: &Path) -> Result<HashMap<String, String>, LlmError> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CallRecord = serde_json::from_str(&line).map_err(|e| LlmError::CacheLoad {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.entry(record.digest).or_insert(record.response);
    }
    Ok(entries)
}

impl Backend for CachedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        if let Some(hit) = self.entries.read().expect("cache poisoned").get(request.digest) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit.clone());
        }
        let inner = match (self.mode, &self.inner) {
            (CacheMode::Replay, _) | (_, None) => {
                return Err(LlmError::CacheMiss {
                    digest: request.digest.to_string(),
                })
            }
            (_, Some(inner)) => inner,
        };
        let started = Instant::now();
        let text = inner.complete(request)?;
        self.forwarded.fetch_add(1, Ordering::SeqCst);
        let record = CallRecord {
            role: request.role,
            digest: request.digest.to_string(),
            response: text.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            timestamp_ms: now_ms(),
        };
        let mut entries = self.entries.write().expect("cache poisoned");
        if !entries.contains_key(request.digest) {
            self.append(&record)?;
            entries.insert(record.digest, text.clone());
        }
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmClient, Prompt, Role, Scripted};

    fn client_over(backend: CachedBackend) -> LlmClient {
        LlmClient::with_backend(backend)
    }

    #[test]
    fn second_identical_request_is_a_hit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let net = Scripted::from_fn(|r| Ok(format!("echo {}", r.prompt.user)));
        let cache = CachedBackend::open(Some(Arc::new(net.clone())), &path, CacheMode::Record).unwrap();
        let client = client_over(cache);
        let p = Prompt::new("", "hi");
        assert_eq!(client.complete(&p, Role::Action).unwrap().text, "echo hi");
        assert_eq!(client.complete(&p, Role::Action).unwrap().text, "echo hi");
        assert_eq!(net.calls(), 1);
        assert_eq!(client.counts().action, 2);
    }

    #[test]
    fn replay_serves_recorded_and_errors_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let net = Scripted::from_fn(|r| Ok(r.prompt.user.to_uppercase()));
            let rec = client_over(CachedBackend::open(Some(Arc::new(net)), &path, CacheMode::Record).unwrap());
            rec.complete(&Prompt::new("", "a"), Role::Action).unwrap();
            rec.complete(&Prompt::new("", "b"), Role::Reflection).unwrap();
        }
        let replay = client_over(CachedBackend::open(None, &path, CacheMode::Replay).unwrap());
        assert_eq!(
            replay.complete(&Prompt::new("", "b"), Role::Reflection).unwrap().text,
            "B"
        );
        let miss = replay.complete(&Prompt::new("", "zzz"), Role::Action).unwrap_err();
        match miss {
            LlmError::CacheMiss { digest } => assert_eq!(digest.len(), 64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let good = CallRecord {
            role: Role::Action,
            digest: "d".into(),
            response: "r".into(),
            latency_ms: 0,
            timestamp_ms: 0,
        };
        let text = format!("{}\n{{not json\n", serde_json::to_string(&good).unwrap());
        std::fs::write(&path, text).unwrap();
        match CachedBackend::open(None, &path, CacheMode::Replay) {
            Err(LlmError::CacheLoad { line, .. }) => assert_eq!(line, 2),
            Err(e) => panic!("unexpected {e:?}"),
            Ok(_) => panic!("corrupt cache accepted"),
        }
    }

    #[test]
    fn concurrent_recording_keeps_file_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let net = Scripted::from_fn(|r| Ok(format!("resp-{}", r.prompt.user)));
        let client = client_over(CachedBackend::open(Some(Arc::new(net)), &path, CacheMode::Record).unwrap());
        std::thread::scope(|s| {
            for t in 0..8 {
                let client = client.clone();
                s.spawn(move || {
                    for i in 0..25 {
                        let p = Prompt::new("", format!("{}", (t * 7 + i) % 50));
                        client.complete(&p, Role::Action).unwrap();
                    }
                });
            }
        });
        let entries = load_entries(&path).unwrap();
        assert_eq!(entries.len(), 50);
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 50);
    }
}

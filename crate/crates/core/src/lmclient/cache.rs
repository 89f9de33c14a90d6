use super::{CompletionRequest, LanguageModel, LmError, Tag};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// Always call the backend and store the response.
    Record,
    /// Serve hits from the cache, call and store on a miss.
    Replay,
    /// Serve hits only; a miss is an error and the backend is never called.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub key: String,
    pub backend: String,
    pub tag: Tag,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub response: String,
    pub recorded_at: String,
}

impl CacheEntry {
    fn same_request(&self, other: &CacheEntry) -> bool {
        self.backend == other.backend
            && self.prompt == other.prompt
            && self.temperature == other.temperature
            && self.max_tokens == other.max_tokens
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CacheError {
    #[error("i/o error on cache file: {0}")]
    Io(String),
    #[error("cache line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("digest {key} already holds a different request")]
    Collision { key: String },
    #[error("digest {key} already holds a different response for the same request")]
    Conflict { key: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: usize,
    pub misses: usize,
    pub backend_calls: usize,
}

/// Record/replay wrapper. The key is the SHA-256 of backend id,
/// temperature, token limit and prompt.
pub struct ReplayCache {
    inner: Option<Arc<dyn LanguageModel>>,
    backend_id: String,
    mode: CacheMode,
    digest_len: usize,
    entries: Arc<RwLock<BTreeMap<String, CacheEntry>>>,
    hits: Arc<AtomicUsize>,
    misses: Arc<AtomicUsize>,
    backend_calls: Arc<AtomicUsize>,
}

impl ReplayCache {
    pub fn new(inner: Arc<dyn LanguageModel>, mode: CacheMode) -> Self {
        let backend_id = inner.id();
        Self::build(Some(inner), backend_id, mode)
    }

    /// A strict cache with no backend behind it; `backend_id` names the
    /// backend the entries were recorded against.
    pub fn offline(backend_id: &str) -> Self {
        Self::build(None, backend_id.to_string(), CacheMode::Strict)
    }

    /// A store with no backend yet, meant to be bound per scenario with
    /// [`ReplayCache::rebind`].
    pub fn store(mode: CacheMode) -> Self {
        Self::build(None, String::new(), mode)
    }

    fn build(inner: Option<Arc<dyn LanguageModel>>, backend_id: String, mode: CacheMode) -> Self {
        Self {
            inner,
            backend_id,
            mode,
            digest_len: 64,
            entries: Arc::default(),
            hits: Arc::default(),
            misses: Arc::default(),
            backend_calls: Arc::default(),
        }
    }

    /// A cache over the same entries, mode and counters, bound to another
    /// backend. Lets per-scenario backends share one store.
    pub fn rebind(&self, inner: Arc<dyn LanguageModel>) -> Self {
        Self {
            backend_id: inner.id(),
            inner: Some(inner),
            mode: self.mode,
            digest_len: self.digest_len,
            entries: self.entries.clone(),
            hits: self.hits.clone(),
            misses: self.misses.clone(),
            backend_calls: self.backend_calls.clone(),
        }
    }

    /// Truncates digests to `hex_chars` characters. Only useful for
    /// exercising collision handling.
    pub fn with_digest_len(mut self, hex_chars: usize) -> Self {
        self.digest_len = hex_chars.clamp(1, 64);
        self
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn key(&self, req: &CompletionRequest) -> String {
        let material =
            serde_json::json!([self.backend_id, req.temperature, req.max_tokens, req.prompt]);
        let mut digest = crate::sha256_hex(material.to_string().as_bytes());
        digest.truncate(self.digest_len);
        digest
    }

    pub fn lookup(&self, key: &str) -> Option<CacheEntry> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn record(&self, entry: CacheEntry) -> Result<(), CacheError> {
        let mut map = self.entries.write().expect("cache lock");
        if let Some(old) = map.get(&entry.key) {
            if !old.same_request(&entry) {
                return Err(CacheError::Collision { key: entry.key });
            }
            if old.response != entry.response {
                return Err(CacheError::Conflict { key: entry.key });
            }
            return Ok(());
        }
        map.insert(entry.key.clone(), entry);
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            entries: self.entries.read().expect("cache lock").len(),
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
        }
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.entries
            .read()
            .expect("cache lock")
            .values()
            .cloned()
            .collect()
    }

    /// JSONL, one entry per line in key order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in self.entries.read().expect("cache lock").values() {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn export(&self, path: &Path) -> Result<(), CacheError> {
        let mut f = std::fs::File::create(path).map_err(|e| CacheError::Io(e.to_string()))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| CacheError::Io(e.to_string()))
    }

    /// Merges entries from a JSONL file; returns the number of lines read.
    pub fn import(&self, path: &Path) -> Result<usize, CacheError> {
        let f = std::fs::File::open(path).map_err(|e| CacheError::Io(e.to_string()))?;
        self.import_reader(BufReader::new(f))
    }

    pub fn import_reader(&self, reader: impl BufRead) -> Result<usize, CacheError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CacheError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry =
                serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            self.record(entry)?;
            n += 1;
        }
        Ok(n)
    }

    fn call_backend(&self, req: &CompletionRequest, key: String) -> Result<String, LmError> {
        let Some(inner) = &self.inner else {
            return Err(LmError::CacheMiss {
                tag: req.tag,
                digest: key,
            });
        };
        self.backend_calls.fetch_add(1, Ordering::SeqCst);
        let response = inner.complete(req)?;
        self.record(CacheEntry {
            key,
            backend: self.backend_id.clone(),
            tag: req.tag,
            prompt: req.prompt.clone(),
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            response: response.clone(),
            recorded_at: chrono::Utc::now().to_rfc3339(),
        })?;
        Ok(response)
    }
}

impl LanguageModel for ReplayCache {
    fn id(&self) -> String {
        self.backend_id.clone()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        let key = self.key(req);
        if self.mode == CacheMode::Record {
            return self.call_backend(req, key);
        }
        if let Some(e) = self.lookup(&key) {
            if e.prompt != req.prompt || e.backend != self.backend_id {
                return Err(CacheError::Collision { key }.into());
            }
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(e.response);
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        match self.mode {
            CacheMode::Strict => Err(LmError::CacheMiss {
                tag: req.tag,
                digest: key,
            }),
            _ => self.call_backend(req, key),
        }
    }
}

//! Language-model backends.
//!
//! Everything that talks to an LM goes through [`LanguageModel`]. Backends:
//! [`ScriptedLm`] (rule table, offline), [`HttpChatLm`] (chat-completion
//! endpoint) and [`ReplayCache`], which wraps another backend to record and
//! replay responses.

mod cache;
mod http;
mod scripted;

pub use cache::{CacheEntry, CacheError, CacheMode, CacheStats, ReplayCache};
pub use http::{HttpChatConfig, HttpChatLm};
pub use scripted::{Rule, RuleSpec, ScriptedLm};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// What a completion is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Generator,
    Retriever,
    Critic,
    Chainer,
    Summarizer,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Generator => "generator",
            Tag::Retriever => "retriever",
            Tag::Critic => "critic",
            Tag::Chainer => "chainer",
            Tag::Summarizer => "summarizer",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: Tag,
}

impl CompletionRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 256;

    /// Greedy request with the default token limit.
    pub fn new(tag: Tag, prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            tag,
        }
    }

    pub fn validate(&self) -> Result<(), LmError> {
        if self.prompt.trim().is_empty() {
            return Err(LmError::InvalidRequest("empty prompt".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LmError::InvalidRequest(format!(
                "temperature {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("model refused: {0}")]
    Refusal(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("no scripted rule matches a {tag} prompt")]
    NoRule { tag: Tag },
    #[error("cache miss for {tag} request {digest}")]
    CacheMiss { tag: Tag, digest: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

pub trait LanguageModel: Send + Sync {
    /// Stable backend identity, part of the cache key.
    fn id(&self) -> String;
    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError>;
}

/// Backend defined by a closure.
pub struct FnLm<F> {
    id: String,
    f: F,
}

impl<F> FnLm<F>
where
    F: Fn(&CompletionRequest) -> Result<String, LmError> + Send + Sync,
{
    pub fn new(id: &str, f: F) -> Self {
        Self {
            id: id.to_string(),
            f,
        }
    }
}

impl<F> LanguageModel for FnLm<F>
where
    F: Fn(&CompletionRequest) -> Result<String, LmError> + Send + Sync,
{
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        (self.f)(req)
    }
}

/// Wrapper counting calls that reach the inner backend.
pub struct CountingLm {
    inner: Arc<dyn LanguageModel>,
    calls: Arc<AtomicUsize>,
}

impl CountingLm {
    pub fn new(inner: Arc<dyn LanguageModel>) -> Self {
        Self::with_counter(inner, Arc::default())
    }

    /// Counts into a counter shared with other wrappers.
    pub fn with_counter(inner: Arc<dyn LanguageModel>, calls: Arc<AtomicUsize>) -> Self {
        Self { inner, calls }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LanguageModel for CountingLm {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

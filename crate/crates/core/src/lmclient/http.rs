use super::{CompletionRequest, LanguageModel, LmError};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpChatConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

impl HttpChatConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: default_key_env(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

/// Chat-completion client: one user message in, first choice's text out.
pub struct HttpChatLm {
    config: HttpChatConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<Message>,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
    refusal: Option<String>,
}

enum Attempt {
    Retry(LmError),
    Fail(LmError),
}

impl HttpChatLm {
    pub fn new(config: HttpChatConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, req: &CompletionRequest) -> Result<String, Attempt> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut call = self.agent.post(&self.endpoint());
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => Attempt::Retry(LmError::Timeout),
            other => Attempt::Retry(LmError::Transport(other.to_string())),
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(LmError::Transport(format!("HTTP {status}"))));
        }
        if status >= 400 {
            return Err(Attempt::Fail(LmError::Transport(format!("HTTP {status}"))));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fail(LmError::Transport(format!("bad response body: {e}"))))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or(Attempt::Fail(LmError::EmptyResponse))?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(Attempt::Fail(LmError::Refusal("content filter".into())));
        }
        let message = choice
            .message
            .ok_or(Attempt::Fail(LmError::EmptyResponse))?;
        if let Some(r) = message.refusal.filter(|r| !r.is_empty()) {
            return Err(Attempt::Fail(LmError::Refusal(r)));
        }
        match message.content {
            Some(c) if !c.trim().is_empty() => Ok(c),
            _ => Err(Attempt::Fail(LmError::EmptyResponse)),
        }
    }
}

impl LanguageModel for HttpChatLm {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        let mut tries = 0;
        loop {
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if tries >= self.config.max_retries {
                        return Err(e);
                    }
                    let wait = self.config.backoff_ms.saturating_mul(1 << tries.min(10));
                    log::warn!("LM request failed ({e}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                    tries += 1;
                }
            }
        }
    }
}

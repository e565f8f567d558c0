use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{Backend, CompletionRequest, LlmError, LlmSettings, Prompt};

/// OpenAI-compatible `chat/completions` client.
///
/// The system block of a [`Prompt`] becomes a `system` message and the
/// remainder a `user` message. `top_k` and `repetition_penalty` are sent
/// until the endpoint rejects them once; after that they are dropped and a
/// warning is logged.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    send_extended: AtomicBool,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry { status: Option<u16>, message: String },
    Rejected { status: u16, message: String },
}

impl HttpBackend {
    pub fn new(settings: &LlmSettings) -> Result<Self, LlmError> {
        if settings.endpoint.trim().is_empty() {
            return Err(LlmError::InvalidSettings {
                field: "endpoint",
                reason: "an endpoint URL is required for the http backend".into(),
            });
        }
        let api_key = std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: chat_url(&settings.endpoint),
            api_key,
            send_extended: AtomicBool::new(true),
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send(body.to_string()) {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    status: None,
                    message: e.to_string(),
                }
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    status: Some(status),
                    message: e.to_string(),
                }
            }
        };
        match status {
            200..=299 => Attempt::Done(text),
            408 | 429 | 500..=599 => Attempt::Retry {
                status: Some(status),
                message: text,
            },
            _ => Attempt::Rejected { status, message: text },
        }
    }
}

fn chat_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else {
        format!("{base}/chat/completions")
    }
}

/// Request body for one call.
pub(crate) fn request_body(settings: &LlmSettings, prompt: &Prompt, extended: bool) -> Value {
    let mut messages = Vec::new();
    if !prompt.system.is_empty() {
        messages.push(json!({"role": "system", "content": prompt.system}));
    }
    messages.push(json!({"role": "user", "content": prompt.user}));
    let mut body = json!({
        "model": settings.model,
        "messages": messages,
        "temperature": settings.temperature,
        "top_p": settings.top_p,
        "max_tokens": settings.max_tokens,
    });
    if extended {
        body["top_k"] = json!(settings.top_k);
        body["repetition_penalty"] = json!(settings.repetition_penalty);
    }
    body
}

fn parse_response(text: &str) -> Result<String, LlmError> {
    let parsed: ChatResponse = serde_json::from_str(text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::BadResponse("no choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let settings = request.settings;
        let max = settings.retry.max_attempts.max(1);
        let mut attempts = 0;
        let mut last_status = None;
        let mut last_message = String::new();
        while attempts < max {
            attempts += 1;
            let extended = self.send_extended.load(Ordering::SeqCst);
            let body = request_body(settings, request.prompt, extended);
            match self.attempt(&body) {
                Attempt::Done(text) => return parse_response(&text),
                Attempt::Rejected { status, message } => {
                    if extended && status == 400 {
                        log::warn!("endpoint rejected top_k/repetition_penalty ({status}); resending without them");
                        self.send_extended.store(false, Ordering::SeqCst);
                        attempts -= 1;
                        continue;
                    }
                    return Err(LlmError::Transport {
                        role: request.role,
                        status: Some(status),
                        attempts,
                        message,
                    });
                }
                Attempt::Retry { status, message } => {
                    last_status = status;
                    last_message = message;
                    if attempts < max {
                        let wait = settings.retry.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                        std::thread::sleep(Duration::from_millis(wait));
                    }
                }
            }
        }
        Err(LlmError::Transport {
            role: request.role,
            status: last_status,
            attempts,
            message: last_message,
        })
    }
}

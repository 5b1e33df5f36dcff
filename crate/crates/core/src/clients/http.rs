//! Chat-completion style HTTP backend with bounded exponential-backoff retry.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use rand::Rng as _;
use serde_json::{json, Value};

use super::{BackendError, ChatBackend, Message, Part, Role, Translator};
use crate::dataset::{Language, LanguageSet};

/// Default credential variable; `MVREASON_API_KEY_<NAME>` overrides it per backend.
pub const API_KEY_ENV: &str = "MVREASON_API_KEY";

/// An API credential. Never displayed, logged or serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// Removes any occurrence of the credential from text that came back over the wire.
    pub fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_owned()
        } else {
            text.replace(&self.0, "<redacted>")
        }
    }

    /// Looks up `MVREASON_API_KEY_<NAME>` then `MVREASON_API_KEY`.
    pub fn from_env(backend_name: &str) -> Option<Self> {
        let suffix: String = backend_name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_uppercase()
                } else {
                    '_'
                }
            })
            .collect();
        [format!("{API_KEY_ENV}_{suffix}"), API_KEY_ENV.to_owned()]
            .iter()
            .find_map(|var| std::env::var(var).ok().filter(|v| !v.is_empty()))
            .map(Self)
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub name: String,
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Directory that relative image references are resolved against.
    pub image_root: Option<PathBuf>,
    pub credential: Option<Secret>,
}

impl BackendConfig {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            image_root: None,
            credential: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("backend `{}`: temperature must be >= 0", self.name));
        }
        if self.max_tokens == 0 {
            return Err(format!("backend `{}`: max_tokens must be positive", self.name));
        }
        if self.max_retries > 10 {
            return Err(format!("backend `{}`: max_retries must be at most 10", self.name));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(format!("backend `{}`: base_url must be an http(s) URL", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub url: String,
    pub bearer: Option<Secret>,
    pub body: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// A failure below HTTP: connection refused, timeout, reset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::InvalidRequest(format!("cannot build HTTP client: {e}")))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = self
            .client
            .post(&request.url)
            .timeout(request.timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(request.body.clone());
        if let Some(secret) = &request.bearer {
            builder = builder.bearer_auth(secret.expose());
        }
        // reqwest error text can include the URL but never headers.
        let resp = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Full-jitter exponential backoff: retry `k` waits uniformly in `[0, min(cap, base * 2^k)]`.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            cap: Duration::from_secs(32),
        }
    }
}

impl Backoff {
    pub fn ceiling(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let ceiling = self.ceiling(retry);
        let nanos = u64::try_from(ceiling.as_nanos()).unwrap_or(u64::MAX);
        Duration::from_nanos(rand::rng().random_range(0..=nanos))
    }
}

struct RetryPolicy {
    transport: Arc<dyn Transport>,
    sleeper: Arc<dyn Sleeper>,
    backoff: Backoff,
    max_retries: u32,
}

impl RetryPolicy {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, BackendError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            // A misbehaving endpoint may echo request headers; nothing it returns
            // may carry the credential further.
            let outcome = match (self.transport.post(request), &request.bearer) {
                (Ok(resp), Some(secret)) => Ok(HttpResponse {
                    status: resp.status,
                    body: secret.scrub(&resp.body),
                }),
                (Err(TransportError(m)), Some(secret)) => Err(TransportError(secret.scrub(&m))),
                (outcome, None) => outcome,
            };
            let transient = match outcome {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp),
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    return Err(BackendError::Auth { status: resp.status })
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => format!("HTTP {}", resp.status),
                Ok(resp) => {
                    let snippet: String = resp.body.chars().take(200).collect();
                    return Err(BackendError::Transport {
                        attempts,
                        message: format!("HTTP {}: {snippet}", resp.status),
                    });
                }
                Err(TransportError(message)) => message,
            };
            if attempts > self.max_retries {
                return Err(BackendError::Transport {
                    attempts,
                    message: transient,
                });
            }
            log::debug!("transient failure ({transient}); retry {attempts}/{}", self.max_retries);
            self.sleeper.sleep(self.backoff.delay(attempts - 1));
        }
    }
}

/// Turns an image reference into a URL the endpoint accepts: remote and data
/// URLs pass through, local files become base64 data URIs.
pub fn resolve_image(reference: &str, image_root: Option<&Path>) -> Result<String, BackendError> {
    if reference.starts_with("http://") || reference.starts_with("https://") || reference.starts_with("data:") {
        return Ok(reference.to_owned());
    }
    let path = match image_root {
        Some(root) => root.join(reference),
        None => PathBuf::from(reference),
    };
    let bytes = std::fs::read(&path)
        .map_err(|e| BackendError::InvalidRequest(format!("cannot read image {}: {e}", path.display())))?;
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/jpeg",
    };
    Ok(format!(
        "data:{mime};base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}

pub struct HttpChatBackend {
    cfg: BackendConfig,
    retry: RetryPolicy,
}

impl HttpChatBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        let transport = Arc::new(ReqwestTransport::new()?);
        Self::with_transport(cfg, transport, Arc::new(ThreadSleeper), Backoff::default())
    }

    pub fn with_transport(
        cfg: BackendConfig,
        transport: Arc<dyn Transport>,
        sleeper: Arc<dyn Sleeper>,
        backoff: Backoff,
    ) -> Result<Self, BackendError> {
        cfg.validate().map_err(BackendError::InvalidRequest)?;
        let retry = RetryPolicy {
            transport,
            sleeper,
            backoff,
            max_retries: cfg.max_retries,
        };
        Ok(Self { cfg, retry })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    /// Request body in the chat-completions wire format.
    pub fn request_body(&self, messages: &[Message]) -> Result<Value, BackendError> {
        let mut wire = Vec::with_capacity(messages.len());
        for m in messages {
            let content = if m.image_count() == 0 {
                Value::String(m.text())
            } else {
                let mut parts = Vec::with_capacity(m.parts().len());
                for p in m.parts() {
                    parts.push(match p {
                        Part::Text(t) => json!({"type": "text", "text": t}),
                        Part::Image(r) => json!({
                            "type": "image_url",
                            "image_url": {"url": resolve_image(r, self.cfg.image_root.as_deref())?}
                        }),
                    });
                }
                Value::Array(parts)
            };
            wire.push(json!({"role": m.role().as_str(), "content": content}));
        }
        Ok(json!({
            "model": self.cfg.model_name,
            "messages": wire,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }))
    }
}

fn parse_chat_reply(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::BadResponseShape(format!("not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| BackendError::BadResponseShape("missing choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => {
            let texts: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            if texts.is_empty() {
                Err(BackendError::BadResponseShape("content has no text parts".into()))
            } else {
                Ok(texts.join(""))
            }
        }
        other => Err(BackendError::BadResponseShape(format!("content is {other}"))),
    }
}

impl ChatBackend for HttpChatBackend {
    fn chat(&self, messages: &[Message]) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if messages.iter().any(|m| m.role() != Role::User && m.image_count() > 0) {
            return Err(BackendError::InvalidRequest("images outside a user message".into()));
        }
        let request = HttpRequest {
            url: self.endpoint(),
            bearer: self.cfg.credential.clone(),
            body: self.request_body(messages)?.to_string(),
            timeout: self.cfg.timeout,
        };
        let resp = self.retry.send(&request)?;
        parse_chat_reply(&resp.body)
    }
}

/// Dedicated translation endpoint: POST `{q, source, target, format}` to
/// `base_url`, reply read from `data.translations[0].translatedText`.
pub struct HttpTranslator {
    cfg: BackendConfig,
    retry: RetryPolicy,
    supported: LanguageSet,
}

impl HttpTranslator {
    pub fn new(cfg: BackendConfig, supported: LanguageSet) -> Result<Self, BackendError> {
        let transport = Arc::new(ReqwestTransport::new()?);
        Self::with_transport(cfg, supported, transport, Arc::new(ThreadSleeper), Backoff::default())
    }

    pub fn with_transport(
        cfg: BackendConfig,
        supported: LanguageSet,
        transport: Arc<dyn Transport>,
        sleeper: Arc<dyn Sleeper>,
        backoff: Backoff,
    ) -> Result<Self, BackendError> {
        cfg.validate().map_err(BackendError::InvalidRequest)?;
        let retry = RetryPolicy {
            transport,
            sleeper,
            backoff,
            max_retries: cfg.max_retries,
        };
        Ok(Self { cfg, retry, supported })
    }
}

impl Translator for HttpTranslator {
    fn translate_text(&self, text: &str, source: &Language, target: &Language) -> Result<String, BackendError> {
        for lang in [source, target] {
            if !self.supported.contains(lang) {
                return Err(BackendError::UnsupportedLanguage(lang.to_string()));
            }
        }
        let body = json!({"q": text, "source": source.as_str(), "target": target.as_str(), "format": "text"});
        let request = HttpRequest {
            url: self.cfg.base_url.clone(),
            bearer: self.cfg.credential.clone(),
            body: body.to_string(),
            timeout: self.cfg.timeout,
        };
        let resp = self.retry.send(&request)?;
        let v: Value =
            serde_json::from_str(&resp.body).map_err(|e| BackendError::BadResponseShape(format!("not JSON: {e}")))?;
        v.pointer("/data/translations/0/translatedText")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::BadResponseShape("missing data.translations[0].translatedText".into()))
    }
}

//! Backend contracts and implementations.
//!
//! Every model role (vision chat, text chat, captioning, VQA) goes through
//! [`ChatBackend`]: a list of [`Message`]s in, reply text out. Translation has
//! its own [`Translator`] contract because it may be served by a dedicated
//! endpoint rather than a chat model.

mod http;
mod scripted;
mod translate;
mod verdict;

use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{
    resolve_image, BackendConfig, Backoff, HttpChatBackend, HttpRequest, HttpResponse, HttpTranslator,
    ReqwestTransport, Secret, Sleeper, ThreadSleeper, Transport, TransportError, API_KEY_ENV,
};
pub use scripted::{load_script, ScriptEntry, ScriptedBackend, ScriptedTranslator, TranslationEntry};
pub use translate::{language_name, ChatTranslator, Translator};
pub use verdict::{extract_label, UnparsableAnswer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("unexpected response shape: {0}")]
    BadResponseShape(String),
    #[error("no scripted reply for fingerprint {0}")]
    UnknownFingerprint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
}

impl BackendError {
    /// Errors that make every later call fail the same way.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Text(String),
    /// Image by reference; pixels are loaded only by live backends.
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMessage")]
pub struct Message {
    role: Role,
    parts: Vec<Part>,
}

#[derive(Deserialize)]
struct RawMessage {
    role: Role,
    parts: Vec<Part>,
}

impl TryFrom<RawMessage> for Message {
    type Error = InvalidMessage;

    fn try_from(raw: RawMessage) -> Result<Self, Self::Error> {
        Message::new(raw.role, raw.parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidMessage {
    #[error("a message needs at least one part")]
    Empty,
    #[error("images may only be attached to user messages")]
    ImageOutsideUser,
}

impl Message {
    pub fn new(role: Role, parts: Vec<Part>) -> Result<Self, InvalidMessage> {
        if parts.is_empty() {
            return Err(InvalidMessage::Empty);
        }
        if role != Role::User && parts.iter().any(|p| matches!(p, Part::Image(_))) {
            return Err(InvalidMessage::ImageOutsideUser);
        }
        Ok(Self { role, parts })
    }

    pub fn user_text(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            parts: vec![Part::Text(text.into())],
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            parts: vec![Part::Text(text.into())],
        }
    }

    /// A user message carrying the given images followed by one text part.
    pub fn user_with_images<I, S>(images: I, text: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut parts: Vec<Part> = images.into_iter().map(|i| Part::Image(i.into())).collect();
        parts.push(Part::Text(text.into()));
        Self {
            role: Role::User,
            parts,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Image(_))).count()
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.role.as_str())?;
        for part in &self.parts {
            match part {
                Part::Text(t) => write!(f, " {t}")?,
                Part::Image(i) => write!(f, " <image:{i}>")?,
            }
        }
        Ok(())
    }
}

/// Stable request identity: hex SHA-256 of the canonical JSON encoding of the messages.
pub fn fingerprint(messages: &[Message]) -> String {
    let canonical = serde_json::to_string(messages).expect("messages always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, messages: &[Message]) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn chat(&self, messages: &[Message]) -> Result<String, BackendError> {
        (**self).chat(messages)
    }
}

/// Wraps a backend and keeps every request it forwards, in call order.
pub struct RecordingBackend<B> {
    inner: B,
    requests: Mutex<Vec<Vec<Message>>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<Vec<Message>> {
        self.requests.lock().expect("recorder lock poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.requests.lock().expect("recorder lock poisoned").len()
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn chat(&self, messages: &[Message]) -> Result<String, BackendError> {
        self.requests
            .lock()
            .expect("recorder lock poisoned")
            .push(messages.to_vec());
        self.inner.chat(messages)
    }
}

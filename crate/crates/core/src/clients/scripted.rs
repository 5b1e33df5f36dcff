//! Deterministic test doubles.
//!
//! A script file holds one JSON record per line. Each record names its request
//! either by `fingerprint` or by the literal `messages` (fingerprinted on load),
//! plus the canned `reply`. An optional `note` is ignored.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{fingerprint, BackendError, ChatBackend, Message, Translator};
use crate::dataset::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<Vec<Message>>,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ScriptEntry {
    pub fn for_messages(messages: &[Message], reply: impl Into<String>) -> Self {
        Self {
            fingerprint: Some(fingerprint(messages)),
            messages: None,
            reply: reply.into(),
            note: None,
        }
    }

    pub fn key(&self) -> Result<String, String> {
        match (&self.fingerprint, &self.messages) {
            (Some(fp), Some(msgs)) if *fp != fingerprint(msgs) => {
                Err(format!("fingerprint {fp} does not match its messages"))
            }
            (Some(fp), _) => Ok(fp.clone()),
            (None, Some(msgs)) => Ok(fingerprint(msgs)),
            (None, None) => Err("entry needs `fingerprint` or `messages`".into()),
        }
    }
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptEntry>, String> {
    read_lines(path)
}

/// Maps request fingerprints to canned replies.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: HashMap<String, String>,
    strict: bool,
    default_reply: String,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    /// Strict backend: unknown fingerprints are errors.
    pub fn strict() -> Self {
        Self {
            strict: true,
            ..Self::default()
        }
    }

    /// Non-strict backend answering `default_reply` to anything unscripted.
    pub fn lenient(default_reply: impl Into<String>) -> Self {
        Self {
            strict: false,
            default_reply: default_reply.into(),
            ..Self::default()
        }
    }

    pub fn with_reply(mut self, messages: &[Message], reply: impl Into<String>) -> Self {
        self.replies.insert(fingerprint(messages), reply.into());
        self
    }

    pub fn with_entries(mut self, entries: impl IntoIterator<Item = ScriptEntry>) -> Result<Self, String> {
        for entry in entries {
            let key = entry.key()?;
            self.replies.insert(key, entry.reply);
        }
        Ok(self)
    }

    pub fn from_file(path: &Path, strict: bool, default_reply: Option<String>) -> Result<Self, String> {
        let base = if strict {
            Self::strict()
        } else {
            Self::lenient(default_reply.unwrap_or_default())
        };
        base.with_entries(load_script(path)?)
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, messages: &[Message]) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let fp = fingerprint(messages);
        match self.replies.get(&fp) {
            Some(reply) => Ok(reply.clone()),
            None if self.strict => Err(BackendError::UnknownFingerprint(fp)),
            None => Ok(self.default_reply.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationEntry {
    pub source_language: Language,
    pub text: String,
    pub translation: String,
}

/// Table-driven translator keyed by (source language, text).
#[derive(Debug, Default)]
pub struct ScriptedTranslator {
    table: HashMap<(Language, String), String>,
    /// Unscripted inputs come back unchanged instead of failing.
    identity_fallback: bool,
    calls: AtomicUsize,
}

impl ScriptedTranslator {
    pub fn strict() -> Self {
        Self::default()
    }

    /// Returns every input unchanged, still counting calls.
    pub fn identity() -> Self {
        Self {
            identity_fallback: true,
            ..Self::default()
        }
    }

    pub fn with(mut self, source: &Language, text: impl Into<String>, translation: impl Into<String>) -> Self {
        self.table.insert((source.clone(), text.into()), translation.into());
        self
    }

    pub fn from_file(path: &Path, identity_fallback: bool) -> Result<Self, String> {
        let mut t = if identity_fallback {
            Self::identity()
        } else {
            Self::strict()
        };
        for e in read_lines::<TranslationEntry>(path)? {
            t.table.insert((e.source_language, e.text), e.translation);
        }
        Ok(t)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Translator for ScriptedTranslator {
    fn translate_text(&self, text: &str, source: &Language, _target: &Language) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match self.table.get(&(source.clone(), text.to_owned())) {
            Some(t) => Ok(t.clone()),
            None if self.identity_fallback => Ok(text.to_owned()),
            None => Err(BackendError::InvalidRequest(format!(
                "no scripted translation for {source} text {text:?}"
            ))),
        }
    }
}

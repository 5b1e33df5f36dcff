use std::sync::Arc;

use super::{BackendError, ChatBackend, Message};
use crate::dataset::{Language, LanguageSet};
use crate::template::{Bindings, PromptTemplate};

/// English display names used in translation prompts.
pub fn language_name(lang: &Language) -> &str {
    match lang.as_str() {
        "en" => "English",
        "id" => "Indonesian",
        "sw" => "Swahili",
        "ta" => "Tamil",
        "tr" => "Turkish",
        "zh" => "Mandarin Chinese",
        other => other,
    }
}

pub trait Translator: Send + Sync {
    /// Performs the translation; callers go through [`Translator::translate`].
    fn translate_text(&self, text: &str, source: &Language, target: &Language) -> Result<String, BackendError>;

    /// Translates `text`, returning it unchanged without a call when the languages agree.
    fn translate(&self, text: &str, source: &Language, target: &Language) -> Result<String, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("nothing to translate".into()));
        }
        if source == target {
            return Ok(text.to_owned());
        }
        self.translate_text(text, source, target)
    }
}

impl<T: Translator + ?Sized> Translator for Arc<T> {
    fn translate_text(&self, text: &str, source: &Language, target: &Language) -> Result<String, BackendError> {
        (**self).translate_text(text, source, target)
    }
}

/// Translation by prompting a chat model.
pub struct ChatTranslator {
    backend: Arc<dyn ChatBackend>,
    template: PromptTemplate,
    supported: LanguageSet,
}

impl ChatTranslator {
    pub fn new(backend: Arc<dyn ChatBackend>, template: PromptTemplate, supported: LanguageSet) -> Self {
        Self {
            backend,
            template,
            supported,
        }
    }
}

impl Translator for ChatTranslator {
    fn translate_text(&self, text: &str, source: &Language, target: &Language) -> Result<String, BackendError> {
        for lang in [source, target] {
            if !self.supported.contains(lang) {
                return Err(BackendError::UnsupportedLanguage(lang.to_string()));
            }
        }
        let prompt = self
            .template
            .render(
                &Bindings::new()
                    .with("statement", text)
                    .with("source_language", language_name(source))
                    .with("target_language", language_name(target)),
            )
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let reply = self.backend.chat(&[Message::user_text(prompt)])?;
        let reply = reply.trim();
        if reply.is_empty() {
            return Err(BackendError::BadResponseShape("empty translation".into()));
        }
        Ok(reply.to_owned())
    }
}

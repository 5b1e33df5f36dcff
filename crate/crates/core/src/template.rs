//! `{placeholder}` prompt templates.
//!
//! `{{` and `}}` produce literal braces. Bound values are inserted verbatim and
//! never rescanned, so a value may itself contain braces.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

pub const PLACEHOLDERS: [&str; 8] = [
    "statement",
    "translated_statement",
    "caption_left",
    "caption_right",
    "grammar",
    "instruction",
    "source_language",
    "target_language",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template `{template}`: unbalanced brace at byte {offset}")]
    Syntax { template: String, offset: usize },
    #[error("template `{template}`: unknown placeholder `{{{name}}}`")]
    UnknownPlaceholder { template: String, name: String },
    #[error("template `{template}`: required placeholder `{{{name}}}` does not appear in the body")]
    RequiredNotInBody { template: String, name: String },
    #[error("template `{template}`: placeholder `{{{name}}}` is unbound")]
    Unbound { template: String, name: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    required: BTreeSet<String>,
    pieces: Vec<Piece>,
}

/// Values for a template's placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.0.insert(name.to_owned(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>, required: &[&str]) -> Result<Self, TemplateError> {
        let name = name.into();
        let body = body.into();
        let pieces = scan(&name, &body)?;
        let tpl = Self {
            required: required.iter().map(|s| (*s).to_owned()).collect(),
            name,
            body,
            pieces,
        };
        let present = tpl.placeholders();
        if let Some(missing) = tpl.required.iter().find(|r| !present.contains(*r)) {
            return Err(TemplateError::RequiredNotInBody {
                template: tpl.name.clone(),
                name: missing.clone(),
            });
        }
        Ok(tpl)
    }

    pub fn from_file(path: &Path, required: &[&str]) -> Result<Self, TemplateError> {
        let body = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(name, body, required)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required(&self) -> &BTreeSet<String> {
        &self.required
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.clone()),
                Piece::Literal(_) => None,
            })
            .collect()
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        let unbound = |name: &str| TemplateError::Unbound {
            template: self.name.clone(),
            name: name.to_owned(),
        };
        if let Some(r) = self.required.iter().find(|r| bindings.get(r).is_none()) {
            return Err(unbound(r));
        }
        let mut out = String::with_capacity(self.body.len());
        for piece in &self.pieces {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Slot(name) => out.push_str(bindings.get(name).ok_or_else(|| unbound(name))?),
            }
        }
        Ok(out)
    }
}

fn scan(template: &str, body: &str) -> Result<Vec<Piece>, TemplateError> {
    let syntax = |offset| TemplateError::Syntax {
        template: template.to_owned(),
        offset,
    };
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < body.len() {
        let rest = &body[i..];
        if rest.starts_with("{{") {
            literal.push('{');
            i += 2;
        } else if rest.starts_with("}}") {
            literal.push('}');
            i += 2;
        } else if bytes[i] == b'{' {
            let close = rest.find('}').ok_or_else(|| syntax(i))?;
            let name = &rest[1..close];
            if !PLACEHOLDERS.contains(&name) {
                if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !name.is_empty() {
                    return Err(TemplateError::UnknownPlaceholder {
                        template: template.to_owned(),
                        name: name.to_owned(),
                    });
                }
                return Err(syntax(i));
            }
            if !literal.is_empty() {
                pieces.push(Piece::Literal(std::mem::take(&mut literal)));
            }
            pieces.push(Piece::Slot(name.to_owned()));
            i += close + 1;
        } else if bytes[i] == b'}' {
            return Err(syntax(i));
        } else {
            let ch = rest.chars().next().expect("non-empty rest");
            literal.push(ch);
            i += ch.len_utf8();
        }
    }
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_escapes() {
        let t = PromptTemplate::new("t", "Statement: {statement}\n{{literal}} {statement}", &["statement"]).unwrap();
        let out = t
            .render(&Bindings::new().with("statement", "a {caption_left} b"))
            .unwrap();
        assert_eq!(out, "Statement: a {caption_left} b\n{literal} a {caption_left} b");
    }

    #[test]
    fn required_must_be_bound() {
        let t = PromptTemplate::new("t", "{statement} {grammar}", &["statement"]).unwrap();
        assert_eq!(
            t.render(&Bindings::new()),
            Err(TemplateError::Unbound {
                template: "t".into(),
                name: "statement".into()
            })
        );
        // Optional but present placeholders must be bound too: nothing may remain.
        assert!(matches!(
            t.render(&Bindings::new().with("statement", "s")),
            Err(TemplateError::Unbound { name, .. }) if name == "grammar"
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            PromptTemplate::new("t", "{nope}", &[]),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            PromptTemplate::new("t", "open { brace", &[]),
            Err(TemplateError::Syntax { offset: 5, .. })
        ));
        assert!(matches!(
            PromptTemplate::new("t", "stray }", &[]),
            Err(TemplateError::Syntax { .. })
        ));
        assert!(matches!(
            PromptTemplate::new("t", "no slots", &["statement"]),
            Err(TemplateError::RequiredNotInBody { .. })
        ));
    }

    #[test]
    fn unicode_literals_preserved() {
        let t = PromptTemplate::new("t", "陈述：{statement}。", &["statement"]).unwrap();
        assert_eq!(
            t.render(&Bindings::new().with("statement", "右图")).unwrap(),
            "陈述：右图。"
        );
    }
}

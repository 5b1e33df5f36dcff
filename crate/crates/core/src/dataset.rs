//! Benchmark records: loading, validation and the canonical line-delimited format.
//!
//! One JSON object per line with exactly the fields `id`, `statement`,
//! `language`, `left_image`, `right_image`, `label`. Blank lines are skipped;
//! every other line either yields an example or aborts the load.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Languages covered by NLVR2 (en) and MaRVL (id, sw, ta, tr, zh).
pub const DEFAULT_LANGUAGES: [&str; 6] = ["en", "id", "sw", "ta", "tr", "zh"];

/// The five MaRVL languages, in report column order.
pub const MARVL_LANGUAGES: [&str; 5] = ["id", "sw", "ta", "tr", "zh"];

pub const ENGLISH: &str = "en";

const WIRE_FIELDS: [&str; 6] = ["id", "statement", "language", "left_image", "right_image", "label"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: not valid UTF-8")]
    NotUtf8 { line: usize },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: unexpected field `{field}`")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: invalid `{field}`: {reason}")]
    InvalidField {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: unrecognized label {raw:?}")]
    BadLabel { line: usize, raw: String },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: language `{found}` does not match expected `{expected}`")]
    LanguageMismatch {
        line: usize,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognized label {0:?}")]
pub struct BadLabel(pub String);

/// A lowercase two-letter language code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Language(String);

impl Language {
    pub fn parse(code: &str) -> Result<Self, String> {
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(Self(code.to_owned()))
        } else {
            Err(format!("`{code}` is not a lowercase two-letter language code"))
        }
    }

    pub fn english() -> Self {
        Self(ENGLISH.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_english(&self) -> bool {
        self.0 == ENGLISH
    }
}

impl TryFrom<String> for Language {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<Language> for String {
    fn from(value: Language) -> Self {
        value.0
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of language codes a load accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSet(BTreeSet<Language>);

impl LanguageSet {
    pub fn new<I, S>(codes: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set = codes
            .into_iter()
            .map(|c| Language::parse(c.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if set.is_empty() {
            return Err("language set must not be empty".into());
        }
        Ok(Self(set))
    }

    pub fn contains(&self, lang: &Language) -> bool {
        self.0.contains(lang)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Language> {
        self.0.iter()
    }
}

impl Default for LanguageSet {
    fn default() -> Self {
        Self::new(DEFAULT_LANGUAGES).expect("default languages are valid")
    }
}

/// One benchmark record: a statement about a pair of images and its truth value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisualReasoningExample {
    pub id: String,
    pub statement: String,
    pub language: Language,
    /// Opaque reference, resolved only when a backend needs pixels.
    pub left_image: String,
    pub right_image: String,
    pub gold_label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub examples: Vec<VisualReasoningExample>,
    pub source_path: String,
    pub language_histogram: BTreeMap<Language, usize>,
}

impl Dataset {
    /// Builds a dataset from already-validated examples, checking id uniqueness.
    pub fn from_examples(
        examples: Vec<VisualReasoningExample>,
        source_path: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(DatasetError::DuplicateId(ex.id.clone()));
            }
        }
        let mut language_histogram = BTreeMap::new();
        for ex in &examples {
            *language_histogram.entry(ex.language.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            examples,
            source_path: source_path.into(),
            language_histogram,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&VisualReasoningExample> {
        self.examples.iter().find(|ex| ex.id == id)
    }

    /// Concatenates datasets in the given order; ids must stay unique.
    pub fn concat(parts: Vec<Dataset>) -> Result<Self, DatasetError> {
        let source = parts
            .iter()
            .map(|d| d.source_path.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let examples = parts.into_iter().flat_map(|d| d.examples).collect();
        Self::from_examples(examples, source)
    }

    /// Serializes to the canonical line format accepted by [`load_dataset`].
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&example_to_line(ex));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_lines().as_bytes())
    }
}

/// Maps the accepted label encodings onto a boolean, case-insensitively.
pub fn normalize_label(raw: &str) -> Result<bool, BadLabel> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(BadLabel(raw.to_owned())),
    }
}

pub fn example_to_line(ex: &VisualReasoningExample) -> String {
    // serde_json maps keep keys sorted, so the line is byte-stable.
    let mut map = Map::new();
    map.insert("id".into(), Value::String(ex.id.clone()));
    map.insert("statement".into(), Value::String(ex.statement.clone()));
    map.insert("language".into(), Value::String(ex.language.to_string()));
    map.insert("left_image".into(), Value::String(ex.left_image.clone()));
    map.insert("right_image".into(), Value::String(ex.right_image.clone()));
    map.insert(
        "label".into(),
        Value::String(if ex.gold_label { "true" } else { "false" }.into()),
    );
    Value::Object(map).to_string()
}

pub fn load_dataset(path: &Path, expected_language: Option<&Language>) -> Result<Dataset, DatasetError> {
    load_dataset_with(path, expected_language, &LanguageSet::default())
}

pub fn load_dataset_with(
    path: &Path,
    expected_language: Option<&Language>,
    languages: &LanguageSet,
) -> Result<Dataset, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_dataset(&bytes, &path.display().to_string(), expected_language, languages)
}

/// Parses the canonical line format from memory.
pub fn parse_dataset(
    bytes: &[u8],
    source_path: &str,
    expected_language: Option<&Language>,
    languages: &LanguageSet,
) -> Result<Dataset, DatasetError> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = std::str::from_utf8(raw_line).map_err(|_| DatasetError::NotUtf8 { line: line_no })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let ex = parse_line(line, line_no, languages)?;
        if let Some(expected) = expected_language {
            if &ex.language != expected {
                return Err(DatasetError::LanguageMismatch {
                    line: line_no,
                    expected: expected.to_string(),
                    found: ex.language.to_string(),
                });
            }
        }
        if !seen.insert(ex.id.clone()) {
            return Err(DatasetError::DuplicateId(ex.id));
        }
        examples.push(ex);
    }
    Dataset::from_examples(examples, source_path)
}

fn parse_line(line: &str, line_no: usize, languages: &LanguageSet) -> Result<VisualReasoningExample, DatasetError> {
    let value: Value = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(DatasetError::Malformed {
            line: line_no,
            message: "expected a JSON object".into(),
        });
    };
    if let Some(field) = obj.keys().find(|k| !WIRE_FIELDS.contains(&k.as_str())) {
        return Err(DatasetError::UnknownField {
            line: line_no,
            field: field.clone(),
        });
    }
    let text = |field: &'static str| -> Result<String, DatasetError> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(DatasetError::MissingField { line: line_no, field }),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(DatasetError::InvalidField {
                line: line_no,
                field,
                reason: format!("expected a string, got {other}"),
            }),
        }
    };
    let nonempty = |field: &'static str, s: String| -> Result<String, DatasetError> {
        if s.trim().is_empty() {
            Err(DatasetError::InvalidField {
                line: line_no,
                field,
                reason: "must not be empty".into(),
            })
        } else {
            Ok(s)
        }
    };

    let id = nonempty("id", text("id")?)?;
    let statement = nonempty("statement", text("statement")?)?;
    let language_raw = text("language")?;
    let language = Language::parse(&language_raw).map_err(|reason| DatasetError::InvalidField {
        line: line_no,
        field: "language",
        reason,
    })?;
    if !languages.contains(&language) {
        return Err(DatasetError::InvalidField {
            line: line_no,
            field: "language",
            reason: format!("`{language}` is not a configured language"),
        });
    }
    let left_image = nonempty("left_image", text("left_image")?)?;
    let right_image = nonempty("right_image", text("right_image")?)?;
    let gold_label = match obj.get("label") {
        None | Some(Value::Null) => {
            return Err(DatasetError::MissingField {
                line: line_no,
                field: "label",
            })
        }
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) => normalize_label(s).map_err(|e| DatasetError::BadLabel {
            line: line_no,
            raw: e.0,
        })?,
        Some(Value::Number(n)) => normalize_label(&n.to_string()).map_err(|e| DatasetError::BadLabel {
            line: line_no,
            raw: e.0,
        })?,
        Some(other) => {
            return Err(DatasetError::BadLabel {
                line: line_no,
                raw: other.to_string(),
            })
        }
    };

    Ok(VisualReasoningExample {
        id,
        statement,
        language,
        left_image,
        right_image,
        gold_label,
    })
}

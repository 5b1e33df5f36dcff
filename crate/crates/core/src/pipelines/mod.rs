//! Reasoning strategies: each maps one example plus backends to a [`Prediction`].
//!
//! Strategies never return errors. Backend, parsing and extraction failures
//! become [`Verdict::Failed`], which scoring counts as incorrect.

mod runner;
mod strategies;
mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clients::{BackendError, Message};
use crate::interp::ExecutionTrace;

pub use runner::{run_all, Pipeline, DEFAULT_MAX_IN_FLIGHT};
pub use strategies::{
    generate_targeted_instructions, parse_instruction_reply, run_caption_reason, run_end_to_end, run_translate_test,
    run_visprog, strip_code_fences, CaptionBackends, InstructionError,
};
pub use templates::{TemplateKind, Templates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "end_to_end")]
    EndToEnd,
    #[serde(rename = "translate_test")]
    TranslateTest,
    #[serde(rename = "visprog")]
    VisProg,
    #[serde(rename = "caption_reason")]
    CaptionReason,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::EndToEnd,
        Strategy::TranslateTest,
        Strategy::VisProg,
        Strategy::CaptionReason,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::EndToEnd => "end_to_end",
            Strategy::TranslateTest => "translate_test",
            Strategy::VisProg => "visprog",
            Strategy::CaptionReason => "caption_reason",
        }
    }

    /// Backend roles the strategy needs bound.
    pub fn roles(self) -> &'static [&'static str] {
        match self {
            Strategy::EndToEnd => &["vision"],
            Strategy::TranslateTest => &["translator", "vision"],
            Strategy::VisProg => &["translator", "codegen", "vqa"],
            Strategy::CaptionReason => &["translator", "instruction", "caption", "reasoning"],
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| {
            format!("unknown strategy `{s}` (expected one of end_to_end, translate_test, visprog, caption_reason)")
        })
    }
}

/// Pipeline stage that made a backend call or failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Translate,
    EndToEnd,
    Codegen,
    Parse,
    Execute,
    Instructions,
    CaptionLeft,
    CaptionRight,
    Reasoning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The backend rejected our credential; later calls will fail alike.
    Auth,
    Backend,
    TranslationError,
    Template,
    UnparsableAnswer,
    SyntaxError,
    InvalidProgram,
    ExecutionError,
    MalformedInstructionReply,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub(crate) fn backend(stage: Stage, err: &BackendError) -> Self {
        let kind = if err.is_fatal() {
            FailureKind::Auth
        } else if stage == Stage::Translate {
            FailureKind::TranslationError
        } else {
            FailureKind::Backend
        };
        Self::new(stage, kind, err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Label(bool),
    Failed(Failure),
}

impl Verdict {
    pub fn label(&self) -> Option<bool> {
        match self {
            Verdict::Label(b) => Some(*b),
            Verdict::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&Failure> {
        match self {
            Verdict::Label(_) => None,
            Verdict::Failed(f) => Some(f),
        }
    }
}

/// One backend call made directly by a pipeline (VQA calls live in the execution trace).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub request: Vec<Message>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePair {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_statement: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<ImagePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<ImagePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl Trace {
    pub(crate) fn new(statement: &str) -> Self {
        Self {
            statement: statement.to_owned(),
            ..Self::default()
        }
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// Backend calls made for this example, including VQA calls.
    pub fn backend_calls(&self) -> usize {
        self.stages.len() + self.execution.as_ref().map_or(0, ExecutionTrace::backend_calls)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub strategy: Strategy,
    pub verdict: Verdict,
    pub trace: Trace,
}

impl Prediction {
    pub fn is_failed(&self) -> bool {
        matches!(self.verdict, Verdict::Failed(_))
    }

    /// The statement in English: the translation when one was made.
    pub fn english_statement(&self) -> Option<&str> {
        self.trace.translated_statement.as_deref()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("predictions serialize")
    }
}

/// Serializes predictions one per line, in the given order.
pub fn predictions_to_jsonl(predictions: &[Prediction]) -> String {
    predictions.iter().map(|p| p.to_json_line() + "\n").collect()
}

pub fn parse_predictions_jsonl(text: &str) -> Result<Vec<Prediction>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

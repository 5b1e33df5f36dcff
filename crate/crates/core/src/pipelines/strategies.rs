use std::sync::Arc;

use thiserror::Error;

use super::{Failure, FailureKind, ImagePair, Prediction, Stage, StageRecord, Strategy, Trace, Verdict};
use crate::clients::{extract_label, BackendError, ChatBackend, Message, Translator};
use crate::dataset::{Language, VisualReasoningExample};
use crate::dsl::{parse_program, ParseError, GRAMMAR_EBNF};
use crate::interp::{execute, ModuleRegistry};
use crate::template::{Bindings, PromptTemplate};

struct Run {
    example_id: String,
    strategy: Strategy,
    trace: Trace,
}

impl Run {
    fn new(ex: &VisualReasoningExample, strategy: Strategy) -> Self {
        Self {
            example_id: ex.id.clone(),
            strategy,
            trace: Trace::new(&ex.statement),
        }
    }

    fn finish(self, verdict: Verdict) -> Prediction {
        Prediction {
            example_id: self.example_id,
            strategy: self.strategy,
            verdict,
            trace: self.trace,
        }
    }

    fn fail(self, failure: Failure) -> Prediction {
        self.finish(Verdict::Failed(failure))
    }

    /// Sends `request` and records the exchange as `stage`.
    fn call(&mut self, stage: Stage, backend: &dyn ChatBackend, request: Vec<Message>) -> Result<String, Failure> {
        let result = backend.chat(&request);
        let (reply, error) = match &result {
            Ok(r) => (Some(r.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.trace.stages.push(StageRecord {
            stage,
            request,
            reply,
            error,
        });
        result.map_err(|e| Failure::backend(stage, &e))
    }

    /// English statement, translating (and recording the call) only for non-English examples.
    fn english(&mut self, ex: &VisualReasoningExample, translator: &dyn Translator) -> Result<String, Failure> {
        if ex.language.is_english() {
            return Ok(ex.statement.clone());
        }
        let result = translator.translate(&ex.statement, &ex.language, &Language::english());
        let (reply, error) = match &result {
            Ok(t) => (Some(t.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.trace.stages.push(StageRecord {
            stage: Stage::Translate,
            request: vec![Message::user_text(ex.statement.clone())],
            reply,
            error,
        });
        let translated = result.map_err(|e| Failure::backend(Stage::Translate, &e))?;
        if translated.trim().is_empty() {
            return Err(Failure::new(
                Stage::Translate,
                FailureKind::TranslationError,
                "empty translation",
            ));
        }
        self.trace.translated_statement = Some(translated.clone());
        Ok(translated)
    }
}

fn render(stage: Stage, template: &PromptTemplate, bindings: &Bindings) -> Result<String, Failure> {
    template
        .render(bindings)
        .map_err(|e| Failure::new(stage, FailureKind::Template, e.to_string()))
}

fn verdict_from(stage: Stage, reply: &str) -> Result<bool, Failure> {
    extract_label(reply).map_err(|e| Failure::new(stage, FailureKind::UnparsableAnswer, e.to_string()))
}

fn collapse(run: Run, outcome: Result<bool, Failure>) -> Prediction {
    match outcome {
        Ok(b) => run.finish(Verdict::Label(b)),
        Err(f) => run.fail(f),
    }
}

fn end_to_end_stage(
    run: &mut Run,
    ex: &VisualReasoningExample,
    statement: &str,
    vision: &dyn ChatBackend,
    template: &PromptTemplate,
) -> Result<bool, Failure> {
    let mut bindings = Bindings::new().with("statement", statement);
    if let Some(t) = &run.trace.translated_statement {
        bindings = bindings.with("translated_statement", t.clone());
    }
    let text = render(Stage::EndToEnd, template, &bindings)?;
    let request = vec![Message::user_with_images(
        [ex.left_image.as_str(), ex.right_image.as_str()],
        text,
    )];
    let reply = run.call(Stage::EndToEnd, vision, request)?;
    verdict_from(Stage::EndToEnd, &reply)
}

/// One vision-chat call with both images and the rendered statement.
pub fn run_end_to_end(ex: &VisualReasoningExample, vision: &dyn ChatBackend, template: &PromptTemplate) -> Prediction {
    let mut run = Run::new(ex, Strategy::EndToEnd);
    let outcome = end_to_end_stage(&mut run, ex, &ex.statement, vision, template);
    collapse(run, outcome)
}

/// Translates the statement to English, then proceeds as end-to-end.
pub fn run_translate_test(
    ex: &VisualReasoningExample,
    translator: &dyn Translator,
    vision: &dyn ChatBackend,
    template: &PromptTemplate,
) -> Prediction {
    let mut run = Run::new(ex, Strategy::TranslateTest);
    let outcome = run
        .english(ex, translator)
        .and_then(|statement| end_to_end_stage(&mut run, ex, &statement, vision, template));
    collapse(run, outcome)
}

/// Extracts the body of the first fenced code block, or returns the trimmed reply.
pub fn strip_code_fences(reply: &str) -> String {
    let Some(open) = reply.find("```") else {
        return reply.trim().to_owned();
    };
    let after_open = &reply[open + 3..];
    // Skip the info string (e.g. ```python).
    let body_start = after_open.find('\n').map_or(after_open.len(), |i| i + 1);
    let body = &after_open[body_start..];
    let body = body.find("```").map_or(body, |close| &body[..close]);
    body.trim().to_owned()
}

fn parse_failure(err: &ParseError) -> Failure {
    let kind = match err {
        ParseError::Syntax { .. } => FailureKind::SyntaxError,
        _ => FailureKind::InvalidProgram,
    };
    Failure::new(Stage::Parse, kind, err.to_string())
}

/// Translate, generate a program, parse it and execute it with VQA bound to `vqa`.
pub fn run_visprog(
    ex: &VisualReasoningExample,
    translator: &dyn Translator,
    codegen: &dyn ChatBackend,
    vqa: Arc<dyn ChatBackend>,
    codegen_template: &PromptTemplate,
) -> Prediction {
    let mut run = Run::new(ex, Strategy::VisProg);
    let outcome = (|| {
        let statement = run.english(ex, translator)?;
        let prompt = render(
            Stage::Codegen,
            codegen_template,
            &Bindings::new()
                .with("statement", statement.clone())
                .with("translated_statement", statement)
                .with("grammar", GRAMMAR_EBNF.trim_end()),
        )?;
        let reply = run.call(Stage::Codegen, codegen, vec![Message::user_text(prompt)])?;
        let source = strip_code_fences(&reply);
        run.trace.program = Some(source.clone());
        let program = parse_program(&source).map_err(|e| parse_failure(&e))?;
        match execute(&program, &ex.left_image, &ex.right_image, &ModuleRegistry::core(vqa)) {
            Ok((verdict, trace)) => {
                run.trace.execution = Some(trace);
                Ok(verdict)
            }
            Err(failure) => {
                run.trace.execution = Some(failure.trace);
                Err(Failure::new(
                    Stage::Execute,
                    FailureKind::ExecutionError,
                    failure.error.to_string(),
                ))
            }
        }
    })();
    collapse(run, outcome)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstructionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Template(String),
    #[error("malformed instruction reply: {0}")]
    MalformedInstructionReply(String),
}

/// Reads `LEFT: ...` and `RIGHT: ...` lines (case-insensitive, optional
/// "image" after the side, optional bullet markers and quotes).
pub fn parse_instruction_reply(reply: &str) -> Result<(String, String), InstructionError> {
    fn field<'a>(line: &'a str, side: &str) -> Option<&'a str> {
        let line = line.trim().trim_start_matches(['-', '*', '#', '>', ' ']);
        let head = line.get(..side.len())?;
        if !head.eq_ignore_ascii_case(side) {
            return None;
        }
        let mut rest = line[side.len()..].trim_start();
        if rest.get(..5).is_some_and(|w| w.eq_ignore_ascii_case("image")) {
            rest = rest[5..].trim_start();
        }
        let rest = rest.trim_start_matches('*').strip_prefix(':')?;
        Some(
            rest.trim()
                .trim_start_matches('*')
                .trim()
                .trim_end_matches(';')
                .trim_matches('"')
                .trim(),
        )
    }
    let left = reply.lines().find_map(|l| field(l, "left"));
    let right = reply.lines().find_map(|l| field(l, "right"));
    match (left, right) {
        (Some(l), Some(r)) if !l.is_empty() && !r.is_empty() => Ok((l.to_owned(), r.to_owned())),
        (None, _) | (Some(""), _) => Err(InstructionError::MalformedInstructionReply(
            "no LEFT instruction".into(),
        )),
        _ => Err(InstructionError::MalformedInstructionReply(
            "no RIGHT instruction".into(),
        )),
    }
}

fn instructions_prompt(statement_en: &str, template: &PromptTemplate) -> Result<String, InstructionError> {
    template
        .render(
            &Bindings::new()
                .with("statement", statement_en)
                .with("translated_statement", statement_en),
        )
        .map_err(|e| InstructionError::Template(e.to_string()))
}

/// Asks a text model for one captioning instruction per image.
pub fn generate_targeted_instructions(
    statement_en: &str,
    text_backend: &dyn ChatBackend,
    template: &PromptTemplate,
) -> Result<(String, String), InstructionError> {
    let prompt = instructions_prompt(statement_en, template)?;
    let reply = text_backend.chat(&[Message::user_text(prompt)])?;
    parse_instruction_reply(&reply)
}

pub struct CaptionBackends<'a> {
    pub translator: &'a dyn Translator,
    pub instruction: &'a dyn ChatBackend,
    pub caption: &'a dyn ChatBackend,
    pub reasoning: &'a dyn ChatBackend,
}

/// Translate, derive per-image instructions, caption each image on its own,
/// then reason over the two captions as text.
pub fn run_caption_reason(
    ex: &VisualReasoningExample,
    backends: &CaptionBackends<'_>,
    instructions_template: &PromptTemplate,
    caption_template: &PromptTemplate,
    reasoning_template: &PromptTemplate,
) -> Prediction {
    let mut run = Run::new(ex, Strategy::CaptionReason);
    let outcome = (|| {
        let statement = run.english(ex, backends.translator)?;

        let prompt = instructions_prompt(&statement, instructions_template)
            .map_err(|e| Failure::new(Stage::Instructions, FailureKind::Template, e.to_string()))?;
        let reply = run.call(
            Stage::Instructions,
            backends.instruction,
            vec![Message::user_text(prompt)],
        )?;
        let (left_instruction, right_instruction) = parse_instruction_reply(&reply).map_err(|e| {
            Failure::new(
                Stage::Instructions,
                FailureKind::MalformedInstructionReply,
                e.to_string(),
            )
        })?;
        run.trace.instructions = Some(ImagePair {
            left: left_instruction.clone(),
            right: right_instruction.clone(),
        });

        let mut captions = Vec::with_capacity(2);
        for (stage, image, instruction) in [
            (Stage::CaptionLeft, &ex.left_image, &left_instruction),
            (Stage::CaptionRight, &ex.right_image, &right_instruction),
        ] {
            let text = render(
                stage,
                caption_template,
                &Bindings::new().with("instruction", instruction.clone()),
            )?;
            let caption = run.call(
                stage,
                backends.caption,
                vec![Message::user_with_images([image.as_str()], text)],
            )?;
            let caption = caption.trim().to_owned();
            if caption.is_empty() {
                return Err(Failure::new(stage, FailureKind::Backend, "empty caption"));
            }
            captions.push(caption);
        }
        let caption_right = captions.pop().expect("two captions");
        let caption_left = captions.pop().expect("two captions");
        run.trace.captions = Some(ImagePair {
            left: caption_left.clone(),
            right: caption_right.clone(),
        });

        let prompt = render(
            Stage::Reasoning,
            reasoning_template,
            &Bindings::new()
                .with("statement", statement.clone())
                .with("translated_statement", statement)
                .with("caption_left", caption_left)
                .with("caption_right", caption_right),
        )?;
        let reasoning = run.call(Stage::Reasoning, backends.reasoning, vec![Message::user_text(prompt)])?;
        run.trace.reasoning = Some(reasoning.clone());
        verdict_from(Stage::Reasoning, &reasoning)
    })();
    collapse(run, outcome)
}

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::strategies::{run_caption_reason, run_end_to_end, run_translate_test, run_visprog, CaptionBackends};
use super::{Prediction, Strategy};
use crate::clients::{ChatBackend, Translator};
use crate::dataset::VisualReasoningExample;
use crate::template::PromptTemplate;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// A strategy with its backends and prompts bound.
// Built once per run, so the unequal variant sizes do not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Clone)]
pub enum Pipeline {
    EndToEnd {
        vision: Arc<dyn ChatBackend>,
        template: PromptTemplate,
    },
    TranslateTest {
        translator: Arc<dyn Translator>,
        vision: Arc<dyn ChatBackend>,
        template: PromptTemplate,
    },
    VisProg {
        translator: Arc<dyn Translator>,
        codegen: Arc<dyn ChatBackend>,
        vqa: Arc<dyn ChatBackend>,
        template: PromptTemplate,
    },
    CaptionReason {
        translator: Arc<dyn Translator>,
        instruction: Arc<dyn ChatBackend>,
        caption: Arc<dyn ChatBackend>,
        reasoning: Arc<dyn ChatBackend>,
        instructions_template: PromptTemplate,
        caption_template: PromptTemplate,
        reasoning_template: PromptTemplate,
    },
}

impl Pipeline {
    pub fn strategy(&self) -> Strategy {
        match self {
            Pipeline::EndToEnd { .. } => Strategy::EndToEnd,
            Pipeline::TranslateTest { .. } => Strategy::TranslateTest,
            Pipeline::VisProg { .. } => Strategy::VisProg,
            Pipeline::CaptionReason { .. } => Strategy::CaptionReason,
        }
    }

    pub fn run(&self, ex: &VisualReasoningExample) -> Prediction {
        match self {
            Pipeline::EndToEnd { vision, template } => run_end_to_end(ex, vision.as_ref(), template),
            Pipeline::TranslateTest {
                translator,
                vision,
                template,
            } => run_translate_test(ex, translator.as_ref(), vision.as_ref(), template),
            Pipeline::VisProg {
                translator,
                codegen,
                vqa,
                template,
            } => run_visprog(ex, translator.as_ref(), codegen.as_ref(), Arc::clone(vqa), template),
            Pipeline::CaptionReason {
                translator,
                instruction,
                caption,
                reasoning,
                instructions_template,
                caption_template,
                reasoning_template,
            } => run_caption_reason(
                ex,
                &CaptionBackends {
                    translator: translator.as_ref(),
                    instruction: instruction.as_ref(),
                    caption: caption.as_ref(),
                    reasoning: reasoning.as_ref(),
                },
                instructions_template,
                caption_template,
                reasoning_template,
            ),
        }
    }
}

/// Runs every example on at most `max_in_flight` workers. Each example's
/// stages run sequentially; the result is ordered by example id.
pub fn run_all(pipeline: &Pipeline, examples: &[VisualReasoningExample], max_in_flight: usize) -> Vec<Prediction> {
    let workers = max_in_flight.max(1).min(examples.len().max(1));
    let next = AtomicUsize::new(0);
    let mut predictions: Vec<Prediction> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(ex) = examples.get(i) else { break };
                        done.push(pipeline.run(ex));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("pipeline worker panicked"))
            .collect()
    });
    predictions.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    predictions
}

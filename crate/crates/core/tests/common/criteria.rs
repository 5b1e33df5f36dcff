//! Constructed fixtures shared by the evaluation tests and the acceptance run.

use std::collections::BTreeMap;
use std::sync::Arc;

use mvreason::clients::{Message, RecordingBackend, ScriptedBackend, ScriptedTranslator};
use mvreason::dataset::{Dataset, Language, VisualReasoningExample};
use mvreason::eval::LanguageScore;
use mvreason::pipelines::{
    generate_targeted_instructions, run_caption_reason, run_end_to_end, CaptionBackends, Prediction, Templates,
};

/// A published row: label, English accuracy, id/sw/ta/tr/zh accuracies and
/// the printed average and gap.
pub struct PublishedRow {
    pub label: &'static str,
    pub english: f64,
    pub marvl: [f64; 5],
    pub average: f64,
    pub gap: f64,
}

pub const PUBLISHED_ROWS: [PublishedRow; 3] = [
    PublishedRow {
        label: "GPT-4V zero-shot",
        english: 81.4,
        marvl: [80.6, 81.0, 78.6, 87.1, 83.2],
        average: 82.1,
        gap: 0.7,
    },
    PublishedRow {
        label: "mBLIP zero-shot",
        english: 67.3,
        marvl: [64.9, 64.8, 69.6, 68.0, 65.9],
        average: 66.6,
        gap: -0.7,
    },
    PublishedRow {
        label: "mBLIP translate-test",
        english: 67.3,
        marvl: [65.2, 66.9, 68.7, 68.2, 67.2],
        average: 67.2,
        gap: -0.1,
    },
];

impl PublishedRow {
    pub fn scores(&self) -> BTreeMap<Language, LanguageScore> {
        mvreason::dataset::MARVL_LANGUAGES
            .iter()
            .zip(self.marvl)
            .map(|(code, acc)| (Language::parse(code).unwrap(), LanguageScore::published(acc)))
            .collect()
    }
}

/// The request `run_end_to_end` sends for `ex` with `statement` substituted.
pub fn end_to_end_request(ex: &VisualReasoningExample, statement: &str) -> Vec<Message> {
    let recorder = RecordingBackend::new(ScriptedBackend::lenient(""));
    let mut probe = ex.clone();
    probe.statement = statement.to_owned();
    run_end_to_end(&probe, &recorder, &Templates::default().end_to_end);
    recorder.requests().pop().expect("one request")
}

/// Replies with the gold label to every example, except "maybe" for ids in
/// `unparsable` and the wrong label for ids in `wrong`.
pub fn gold_backend(examples: &[VisualReasoningExample], unparsable: &[String], wrong: &[String]) -> ScriptedBackend {
    examples.iter().fold(ScriptedBackend::strict(), |b, ex| {
        let reply = if unparsable.contains(&ex.id) {
            "maybe".to_owned()
        } else {
            let answer = ex.gold_label != wrong.contains(&ex.id);
            format!("{}.", if answer { "True" } else { "False" })
        };
        b.with_reply(&end_to_end_request(ex, &ex.statement), reply)
    })
}

/// Word counts per bucket (width 5) and how many of the four examples in
/// each bucket the scripted model gets right.
pub const LENGTH_PLAN: [(usize, usize); 4] = [(3, 4), (8, 3), (13, 2), (18, 1)];

pub const NOUNS: [&str; 16] = [
    "kite", "boat", "dog", "lamp", "chair", "bottle", "horse", "clock", "bicycle", "window", "apple", "guitar",
    "bridge", "candle", "train", "basket",
];

/// Sixteen Swahili-tagged examples whose English translations have 3, 8, 13
/// or 18 words, with a vision script whose accuracy falls as they grow.
pub struct LengthFixture {
    pub dataset: Dataset,
    pub translator: ScriptedTranslator,
    pub vision: Arc<ScriptedBackend>,
}

fn english_of_length(noun: &str, words: usize) -> String {
    let mut out = vec!["the", noun, "appears"];
    let filler = [
        "in", "both", "images", "near", "a", "wall", "under", "soft", "light", "with", "people", "around", "it",
        "today", "again",
    ];
    out.extend(filler.iter().take(words - 3));
    out.join(" ")
}

pub fn length_fixture() -> LengthFixture {
    let sw = Language::parse("sw").unwrap();
    let mut examples = Vec::new();
    let mut translator = ScriptedTranslator::strict();
    let mut vision = ScriptedBackend::strict();
    for (bucket, (words, right)) in LENGTH_PLAN.iter().enumerate() {
        for i in 0..4 {
            let noun = NOUNS[bucket * 4 + i];
            let ex = VisualReasoningExample {
                id: format!("len-{bucket}-{i}"),
                statement: format!("sentensi {noun} {words}"),
                language: sw.clone(),
                left_image: format!("{noun}-left.jpg"),
                right_image: format!("{noun}-right.jpg"),
                gold_label: i % 2 == 0,
            };
            let english = english_of_length(noun, *words);
            assert_eq!(english.split_whitespace().count(), *words);
            translator = translator.with(&sw, ex.statement.clone(), english.clone());
            let answer = ex.gold_label == (i < *right);
            vision = vision.with_reply(
                &end_to_end_request(&ex, &english),
                if answer { "True" } else { "False" },
            );
            examples.push(ex);
        }
    }
    LengthFixture {
        dataset: Dataset::from_examples(examples, "length").unwrap(),
        translator,
        vision: Arc::new(vision),
    }
}

// ---------------------------------------------------------------------------
// The pencil example for caption-then-reason. The Chinese statement is a
// rendering of the English one for this fixture.

pub const PENCIL_ZH: &str = "左边的图片里有几支不同颜色的铅笔，右边的图片里只有一支铅笔";
pub const PENCIL_EN: &str =
    "The picture on the left has several pencils of different colors, and the picture on the right has only one pencil";
pub const PENCIL_LEFT_INSTRUCTION: &str = "Write a short caption describing the number and colors of pencils";
pub const PENCIL_RIGHT_INSTRUCTION: &str = "Write a short caption describing the number of pencils";
pub const PENCIL_LEFT_CAPTION: &str =
    "A pencil case containing a single natural wood colored pencil along with other stationery items.";
pub const PENCIL_RIGHT_CAPTION: &str = "A young mind sketches ideas with a classic green pencil, one among a vast array of tools to capture creativity on paper.";
pub const PENCIL_REASONING: &str = "The statement is False. This is because the left image is described to include only a single two-toned pencil, which implies there are not several pencils of different colors in the left image. However, the statement claims that there should be several pencils of different colors in the left image. Meanwhile, the right image correctly only shows a single green pencil, but the statement is negated by the inaccuracy of the first part regarding the left image.";

pub struct PencilRun {
    pub prediction: Prediction,
    pub caption_requests: Vec<Vec<Message>>,
    pub reasoning_requests: Vec<Vec<Message>>,
}

fn pencil_pair(id: &str, code: &str, statement: &str, gold: bool) -> VisualReasoningExample {
    VisualReasoningExample {
        id: id.into(),
        statement: statement.into(),
        language: Language::parse(code).unwrap(),
        left_image: "left.jpg".into(),
        right_image: "right.jpg".into(),
        gold_label: gold,
    }
}

/// The request `generate_targeted_instructions` sends for `statement`.
pub fn instruction_request(statement: &str, templates: &Templates) -> Vec<Message> {
    let recorder = RecordingBackend::new(ScriptedBackend::lenient("LEFT: x\nRIGHT: y"));
    generate_targeted_instructions(statement, &recorder, &templates.instructions).unwrap();
    recorder.requests().pop().unwrap()
}

/// Runs caption-then-reason on the pencil pair with every stage scripted.
pub fn run_pencil() -> PencilRun {
    let templates = Templates::default();
    let ex = pencil_pair("zh-pencil", "zh", PENCIL_ZH, false);
    let translator = ScriptedTranslator::strict().with(&Language::parse("zh").unwrap(), PENCIL_ZH, PENCIL_EN);
    let instruction = ScriptedBackend::strict().with_reply(
        &instruction_request(PENCIL_EN, &templates),
        format!("LEFT: {PENCIL_LEFT_INSTRUCTION}\nRIGHT: {PENCIL_RIGHT_INSTRUCTION}"),
    );
    let caption_request = |image: &str, instruction: &str| {
        vec![Message::user_with_images(
            [image],
            templates
                .caption
                .render(&mvreason::template::Bindings::new().with("instruction", instruction))
                .unwrap(),
        )]
    };
    let captioner = RecordingBackend::new(
        ScriptedBackend::strict()
            .with_reply(
                &caption_request("left.jpg", PENCIL_LEFT_INSTRUCTION),
                PENCIL_LEFT_CAPTION,
            )
            .with_reply(
                &caption_request("right.jpg", PENCIL_RIGHT_INSTRUCTION),
                PENCIL_RIGHT_CAPTION,
            ),
    );
    let reasoning = RecordingBackend::new(ScriptedBackend::lenient(PENCIL_REASONING));

    let p = run_caption_reason(
        &ex,
        &CaptionBackends {
            translator: &translator,
            instruction: &instruction,
            caption: &captioner,
            reasoning: &reasoning,
        },
        &templates.instructions,
        &templates.caption,
        &templates.reasoning,
    );

    PencilRun {
        prediction: p,
        caption_requests: captioner.requests(),
        reasoning_requests: reasoning.requests(),
    }
}

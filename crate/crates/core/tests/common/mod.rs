//! Shared fixtures: the bundled synthetic multilingual set and the scripts
//! that drive it. The committed files under `fixtures/` are generated from
//! these tables (see `tests/fixtures.rs`).

#![allow(dead_code)]

pub mod criteria;
pub mod dsl_oracles;

use std::path::PathBuf;
use std::sync::Arc;

use mvreason::clients::{fingerprint, Message, RecordingBackend, ScriptedBackend, ScriptedTranslator};
use mvreason::dataset::{Dataset, Language, VisualReasoningExample};
use mvreason::interp::VqaModule;
use mvreason::pipelines::{run_end_to_end, run_translate_test, Templates};
use serde_json::json;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn synthetic_dir() -> PathBuf {
    fixtures_dir().join("synthetic")
}

/// One row of the synthetic set with its English rendering and the vision
/// model's scripted replies: to the original statement, and to the English one.
pub struct Row {
    pub id: &'static str,
    pub language: &'static str,
    pub statement: &'static str,
    pub english: &'static str,
    pub label: bool,
    pub reply_original: &'static str,
    pub reply_english: &'static str,
}

pub const ROWS: [Row; 20] = [
    Row {
        id: "en-01",
        language: "en",
        statement: "There are exactly two dogs in the right image.",
        english: "There are exactly two dogs in the right image.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "en-02",
        language: "en",
        statement: "The left image shows a red bus on a street.",
        english: "The left image shows a red bus on a street.",
        label: false,
        reply_original: "False.",
        reply_english: "False.",
    },
    Row {
        id: "en-03",
        language: "en",
        statement: "Both images contain at least one cup of tea.",
        english: "Both images contain at least one cup of tea.",
        label: true,
        reply_original: "yes",
        reply_english: "yes",
    },
    Row {
        id: "en-04",
        language: "en",
        statement: "The right image has more birds than the left image.",
        english: "The right image has more birds than the left image.",
        label: false,
        reply_original: "False",
        reply_english: "False",
    },
    Row {
        id: "id-01",
        language: "id",
        statement: "Gambar kiri menunjukkan sebuah perahu di sungai.",
        english: "The left image shows a boat on a river.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "id-02",
        language: "id",
        statement: "Ada tiga orang yang menari di gambar kanan.",
        english: "There are three people dancing in the right image.",
        label: false,
        reply_original: "I cannot tell from these images.",
        reply_english: "False",
    },
    Row {
        id: "id-03",
        language: "id",
        statement: "Kedua gambar menampilkan nasi tumpeng.",
        english: "Both images show a tumpeng rice cone.",
        label: true,
        reply_original: "True",
        reply_english: "False",
    },
    Row {
        id: "sw-01",
        language: "sw",
        statement: "Picha ya kushoto ina ngoma mbili.",
        english: "The left picture has two drums.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "sw-02",
        language: "sw",
        statement: "Picha zote mbili zinaonyesha mti wa mnazi.",
        english: "Both pictures show a coconut palm.",
        label: false,
        reply_original: "False",
        reply_english: "False",
    },
    Row {
        id: "sw-03",
        language: "sw",
        statement: "Picha ya kulia ina mtu anayepika ugali.",
        english: "The right picture has a person cooking ugali.",
        label: true,
        reply_original: "False",
        reply_english: "True",
    },
    Row {
        id: "ta-01",
        language: "ta",
        statement: "இடது படத்தில் ஒரு யானை உள்ளது.",
        english: "There is an elephant in the left picture.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "ta-02",
        language: "ta",
        statement: "வலது படத்தில் இரண்டு பூனைகள் உள்ளன.",
        english: "There are two cats in the right picture.",
        label: false,
        reply_original: "Answer: no",
        reply_english: "False",
    },
    Row {
        id: "ta-03",
        language: "ta",
        statement: "இரண்டு படங்களிலும் கோலம் வரையப்பட்டுள்ளது.",
        english: "A kolam is drawn in both pictures.",
        label: true,
        reply_original: "The pictures are ambiguous.",
        reply_english: "True",
    },
    Row {
        id: "tr-01",
        language: "tr",
        statement: "Sol resimde bir kedi var.",
        english: "There is a cat in the left picture.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "tr-02",
        language: "tr",
        statement: "Sağ resimde üç bardak çay var.",
        english: "There are three glasses of tea in the right picture.",
        label: false,
        reply_original: "False",
        reply_english: "Unclear.",
    },
    Row {
        id: "tr-03",
        language: "tr",
        statement: "İki resimde de simit görülüyor.",
        english: "Simit is visible in both pictures.",
        label: true,
        reply_original: "True",
        reply_english: "True",
    },
    Row {
        id: "tr-04",
        language: "tr",
        statement: "Sol resimde hiç insan yok.",
        english: "There are no people in the left picture.",
        label: false,
        reply_original: "False",
        reply_english: "False",
    },
    Row {
        id: "zh-01",
        language: "zh",
        statement: "右图有青绿色的苹果",
        english: "the picture on the right has turquoise apples",
        label: true,
        reply_original: "True",
        reply_english: "False",
    },
    Row {
        id: "zh-02",
        language: "zh",
        statement: "左图中有两只熊猫。",
        english: "There are two pandas in the left picture.",
        label: false,
        reply_original: "False",
        reply_english: "False",
    },
    Row {
        id: "zh-03",
        language: "zh",
        statement: "两张图片中都有饺子。",
        english: "Both pictures contain dumplings.",
        label: true,
        reply_original: "True",
        reply_english: "False",
    },
];

/// Ten hand-written MaRVL-style statements with canned translations.
pub const TEN_TRANSLATIONS: [(&str, &str, &str); 10] = [
    (
        "zh",
        "右图有青绿色的苹果",
        "the picture on the right has turquoise apples",
    ),
    (
        "zh",
        "左图中至少有三个灯笼。",
        "There are at least three lanterns in the left picture.",
    ),
    (
        "id",
        "Gambar kanan menunjukkan dua ekor kucing.",
        "The right picture shows two cats.",
    ),
    (
        "id",
        "Ada sepeda motor di kedua gambar.",
        "There is a motorcycle in both pictures.",
    ),
    (
        "sw",
        "Picha ya kushoto ina watoto wanaocheza mpira.",
        "The left picture has children playing football.",
    ),
    (
        "sw",
        "Kuna kikombe kimoja tu cha chai kwenye picha ya kulia.",
        "There is only one cup of tea in the right picture.",
    ),
    (
        "ta",
        "இரண்டு படங்களிலும் மயில் உள்ளது.",
        "There is a peacock in both pictures.",
    ),
    (
        "ta",
        "வலது படத்தில் ஒரு கோவில் உள்ளது.",
        "There is a temple in the right picture.",
    ),
    (
        "tr",
        "Sağ resimde iki tane simit var.",
        "There are two simits in the right picture.",
    ),
    (
        "tr",
        "Sol resimde bir kedi ve bir köpek var.",
        "There is a cat and a dog in the left picture.",
    ),
];

/// Ten English statements with the instruction pair a text model is scripted to return.
pub const TEN_INSTRUCTIONS: [(&str, &str, &str); 10] = [
    ("The picture on the left has several pencils of different colors, and the picture on the right has only one pencil", "Write a short caption describing the number and colors of pencils", "Write a short caption describing the number of pencils"),
    ("the picture on the right has turquoise apples", "Write a short caption describing any fruit and its color", "Write a short caption describing the apples and their color"),
    ("There are at least three lanterns in the left picture.", "Write a short caption counting the lanterns", "Write a short caption describing the scene"),
    ("The right picture shows two cats.", "Write a short caption describing the animals", "Write a short caption counting the cats"),
    ("There is a motorcycle in both pictures.", "Write a short caption describing any vehicles", "Write a short caption describing any vehicles"),
    ("The left picture has children playing football.", "Write a short caption describing the people and what they are doing", "Write a short caption describing the scene"),
    ("There is only one cup of tea in the right picture.", "Write a short caption describing the scene", "Write a short caption counting the cups and describing their contents"),
    ("There is a peacock in both pictures.", "Write a short caption describing any birds", "Write a short caption describing any birds"),
    ("There is a temple in the right picture.", "Write a short caption describing the scene", "Write a short caption describing any buildings"),
    ("There is a cat and a dog in the left picture.", "Write a short caption naming every animal", "Write a short caption describing the scene"),
];

pub fn ten_translation_lines() -> String {
    TEN_TRANSLATIONS
        .iter()
        .map(|(lang, text, en)| json!({"source_language": lang, "text": text, "translation": en}).to_string() + "\n")
        .collect()
}

pub const LANGUAGES: [&str; 6] = ["en", "id", "sw", "ta", "tr", "zh"];

pub fn example(row: &Row) -> VisualReasoningExample {
    VisualReasoningExample {
        id: row.id.into(),
        statement: row.statement.into(),
        language: Language::parse(row.language).unwrap(),
        left_image: format!("images/{}-left.jpg", row.id),
        right_image: format!("images/{}-right.jpg", row.id),
        gold_label: row.label,
    }
}

pub fn synthetic_examples() -> Vec<VisualReasoningExample> {
    ROWS.iter().map(example).collect()
}

pub fn synthetic_dataset() -> Dataset {
    Dataset::from_examples(synthetic_examples(), "synthetic").unwrap()
}

pub fn synthetic_translator() -> ScriptedTranslator {
    ROWS.iter()
        .filter(|r| r.language != "en")
        .fold(ScriptedTranslator::strict(), |t, r| {
            t.with(&Language::parse(r.language).unwrap(), r.statement, r.english)
        })
}

/// The exact request the end-to-end prompt sends for `statement`.
fn vision_request(ex: &VisualReasoningExample, templates: &Templates, english: bool) -> Vec<Message> {
    let recorder = RecordingBackend::new(ScriptedBackend::lenient(""));
    if english {
        run_translate_test(ex, &synthetic_translator(), &recorder, &templates.end_to_end);
    } else {
        run_end_to_end(ex, &recorder, &templates.end_to_end);
    }
    recorder.requests().pop().expect("one vision request")
}

/// Script lines answering both the original and the English prompts.
pub fn vision_script_lines() -> String {
    let templates = Templates::default();
    let mut out = String::new();
    for row in &ROWS {
        let ex = example(row);
        let mut push = |messages: Vec<Message>, reply: &str, note: String| {
            let line = json!({"fingerprint": fingerprint(&messages), "reply": reply, "note": note});
            out.push_str(&line.to_string());
            out.push('\n');
        };
        push(
            vision_request(&ex, &templates, false),
            row.reply_original,
            format!("{} original", row.id),
        );
        if row.language != "en" {
            push(
                vision_request(&ex, &templates, true),
                row.reply_english,
                format!("{} english", row.id),
            );
        }
    }
    out
}

pub fn vision_backend() -> Arc<ScriptedBackend> {
    let templates = Templates::default();
    let mut b = ScriptedBackend::strict();
    for row in &ROWS {
        let ex = example(row);
        b = b.with_reply(&vision_request(&ex, &templates, false), row.reply_original);
        if row.language != "en" {
            b = b.with_reply(&vision_request(&ex, &templates, true), row.reply_english);
        }
    }
    Arc::new(b)
}

pub fn translation_lines() -> String {
    ROWS.iter()
        .filter(|r| r.language != "en")
        .map(|r| {
            json!({"source_language": r.language, "text": r.statement, "translation": r.english}).to_string() + "\n"
        })
        .collect()
}

pub fn dataset_file(language: &str) -> String {
    ROWS.iter()
        .filter(|r| r.language == language)
        .map(|r| mvreason::dataset::example_to_line(&example(r)) + "\n")
        .collect()
}

pub const BEDROOM_PROGRAM: &str = "ANSWER0=VQA(image=LEFT,question='Is there anyone in the bedroom?')
ANSWER1=VQA(image=RIGHT,question='Is there anyone in the bedroom?')
ANSWER2=EVAL(ANSWER0 == False and ANSWER1 == True)
FINAL_ANSWER=RESULT(var=ANSWER2)
";

pub const BEDROOM_QUESTION: &str = "Is there anyone in the bedroom?";

/// A script answering the bedroom question per image, keyed by literal messages.
pub fn vqa_script_lines(left: &str, right: &str) -> String {
    [("left.jpg", left), ("right.jpg", right)]
        .iter()
        .map(|(image, reply)| {
            json!({"messages": VqaModule::request(image, BEDROOM_QUESTION), "reply": reply}).to_string() + "\n"
        })
        .collect()
}

pub fn config_text(strategy: &str, translator: &str) -> String {
    let mut body = format!(
        "# Scripted run over the bundled synthetic set.\nstrategy = \"{strategy}\"\nmax_in_flight = 4\nbucket_width = 5\nstrict = true\n\n[datasets]\n"
    );
    for lang in LANGUAGES {
        body.push_str(&format!("{lang} = \"{lang}.jsonl\"\n"));
    }
    body.push_str("\n[backends.vision]\nkind = \"scripted\"\nscript = \"vision_script.jsonl\"\n");
    match translator {
        "identity" => body.push_str("\n[backends.translator]\nkind = \"identity\"\n"),
        _ => {
            body.push_str("\n[backends.translator]\nkind = \"scripted_translator\"\nscript = \"translations.jsonl\"\n")
        }
    }
    body.push_str("\n[roles]\nvision = \"vision\"\ntranslator = \"translator\"\n");
    body
}

/// Every generated fixture file, relative to `fixtures/`.
pub fn generated_files() -> Vec<(String, String)> {
    let mut files = Vec::new();
    for lang in LANGUAGES {
        files.push((format!("synthetic/{lang}.jsonl"), dataset_file(lang)));
    }
    files.push(("synthetic/vision_script.jsonl".into(), vision_script_lines()));
    files.push(("synthetic/translations.jsonl".into(), translation_lines()));
    files.push((
        "synthetic/end_to_end.toml".into(),
        config_text("end_to_end", "scripted"),
    ));
    files.push((
        "synthetic/translate_test.toml".into(),
        config_text("translate_test", "scripted"),
    ));
    files.push((
        "synthetic/translate_test_identity.toml".into(),
        config_text("translate_test", "identity"),
    ));
    files.push(("translations/ten.jsonl".into(), ten_translation_lines()));
    files.push(("programs/bedroom.vp".into(), BEDROOM_PROGRAM.into()));
    files.push((
        "programs/unknown_op.vp".into(),
        "ANSWER0=VQA(image=LEFT,question='Is there anyone in the bedroom?')\nANSWER1=COUNT(image=RIGHT,object='bed')\nFINAL_ANSWER=RESULT(var=ANSWER0)\n".into(),
    ));
    files.push(("programs/empty.vp".into(), String::new()));
    files.push(("scripts/vqa_yes_no.jsonl".into(), vqa_script_lines("yes", "no")));
    files.push(("scripts/vqa_no_yes.jsonl".into(), vqa_script_lines("no", "yes")));
    files
}

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_mvreason"))
        .args(args)
        .env_remove("MVREASON_API_KEY")
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

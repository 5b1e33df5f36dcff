//! Scoring and reports.
//!
//! Accuracies are kept unrounded; rounding to one decimal happens only when
//! rendering. The MaRVL average is the unweighted mean of the per-language
//! accuracies present among id, sw, ta, tr and zh.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::json;
use thiserror::Error;

use crate::dataset::{Dataset, Language, MARVL_LANGUAGES};
use crate::pipelines::Prediction;

pub const DEFAULT_BUCKET_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("prediction for unknown example id {0:?}")]
    UnknownExampleId(String),
    #[error("more than one prediction for example id {0:?}")]
    DuplicatePrediction(String),
    #[error("no prediction for example id {0:?}")]
    MissingPrediction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LengthError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("example {0:?} is not English and its prediction has no stored translation")]
    MissingTranslation(String),
    #[error("bucket width must be at least 1")]
    InvalidBucketWidth,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LanguageCounts {
    pub n: usize,
    pub correct: usize,
}

impl LanguageCounts {
    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| 100.0 * self.correct as f64 / self.n as f64)
    }
}

/// Per-language accuracy, either scored here or taken from a published table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanguageScore {
    pub counts: Option<LanguageCounts>,
    /// Percent, unrounded.
    pub accuracy: f64,
}

impl LanguageScore {
    pub fn from_counts(counts: LanguageCounts) -> Option<Self> {
        counts.accuracy().map(|accuracy| Self {
            counts: Some(counts),
            accuracy,
        })
    }

    pub fn published(accuracy: f64) -> Self {
        Self { counts: None, accuracy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthBucket {
    pub low: usize,
    pub high: usize,
    pub n: usize,
    pub correct: usize,
}

impl LengthBucket {
    pub fn accuracy(&self) -> f64 {
        100.0 * self.correct as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub strategy: Option<String>,
    pub per_language: BTreeMap<Language, LanguageScore>,
    pub english_accuracy: Option<f64>,
    pub marvl_average: Option<f64>,
    /// `marvl_average - english_accuracy`.
    pub gap: Option<f64>,
    pub length_table: Option<Vec<LengthBucket>>,
}

fn index_predictions<'a>(
    predictions: &'a [Prediction],
    dataset: &Dataset,
    strict: bool,
) -> Result<HashMap<&'a str, &'a Prediction>, ScoreError> {
    let known: HashSet<&str> = dataset.examples.iter().map(|e| e.id.as_str()).collect();
    let mut by_id = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains(p.example_id.as_str()) {
            return Err(ScoreError::UnknownExampleId(p.example_id.clone()));
        }
        if by_id.insert(p.example_id.as_str(), p).is_some() {
            return Err(ScoreError::DuplicatePrediction(p.example_id.clone()));
        }
    }
    if strict {
        if let Some(missing) = dataset.examples.iter().find(|e| !by_id.contains_key(e.id.as_str())) {
            return Err(ScoreError::MissingPrediction(missing.id.clone()));
        }
    }
    Ok(by_id)
}

/// Counts correct verdicts per example language. Failed verdicts count as incorrect.
pub fn score(
    predictions: &[Prediction],
    dataset: &Dataset,
    strict: bool,
) -> Result<BTreeMap<Language, LanguageCounts>, ScoreError> {
    let by_id = index_predictions(predictions, dataset, strict)?;
    let mut counts: BTreeMap<Language, LanguageCounts> = BTreeMap::new();
    for ex in &dataset.examples {
        let Some(p) = by_id.get(ex.id.as_str()) else { continue };
        let c = counts.entry(ex.language.clone()).or_default();
        c.n += 1;
        if p.verdict.label() == Some(ex.gold_label) {
            c.correct += 1;
        }
    }
    Ok(counts)
}

/// Builds a report from per-language scores. `english_accuracy`, when given,
/// overrides the `en` entry as the reference for the gap.
pub fn aggregate(per_language: &BTreeMap<Language, LanguageScore>, english_accuracy: Option<f64>) -> EvalReport {
    let english = english_accuracy.or_else(|| per_language.get(&Language::english()).map(|s| s.accuracy));
    let marvl: Vec<f64> = per_language
        .iter()
        .filter(|(lang, _)| MARVL_LANGUAGES.contains(&lang.as_str()))
        .map(|(_, s)| s.accuracy)
        .collect();
    let marvl_average = (!marvl.is_empty()).then(|| marvl.iter().sum::<f64>() / marvl.len() as f64);
    let gap = match (marvl_average, english) {
        (Some(avg), Some(en)) => Some(avg - en),
        _ => None,
    };
    EvalReport {
        strategy: None,
        per_language: per_language.clone(),
        english_accuracy: english,
        marvl_average,
        gap,
        length_table: None,
    }
}

pub fn aggregate_counts(counts: &BTreeMap<Language, LanguageCounts>, english_accuracy: Option<f64>) -> EvalReport {
    let scores = counts
        .iter()
        .filter_map(|(lang, c)| LanguageScore::from_counts(*c).map(|s| (lang.clone(), s)))
        .collect();
    aggregate(&scores, english_accuracy)
}

/// Accuracy by English word count, in buckets `[1..w], [w+1..2w], ...`; empty buckets are omitted.
pub fn length_analysis(
    predictions: &[Prediction],
    dataset: &Dataset,
    bucket_width: usize,
) -> Result<Vec<LengthBucket>, LengthError> {
    if bucket_width == 0 {
        return Err(LengthError::InvalidBucketWidth);
    }
    let by_id = index_predictions(predictions, dataset, false)?;
    let mut buckets: BTreeMap<usize, LengthBucket> = BTreeMap::new();
    for ex in &dataset.examples {
        let Some(p) = by_id.get(ex.id.as_str()) else { continue };
        let text = if ex.language.is_english() {
            p.english_statement().unwrap_or(&ex.statement)
        } else {
            p.english_statement()
                .ok_or_else(|| LengthError::MissingTranslation(ex.id.clone()))?
        };
        let words = text.split_whitespace().count().max(1);
        let index = (words - 1) / bucket_width;
        let b = buckets.entry(index).or_insert(LengthBucket {
            low: index * bucket_width + 1,
            high: (index + 1) * bucket_width,
            n: 0,
            correct: 0,
        });
        b.n += 1;
        if p.verdict.label() == Some(ex.gold_label) {
            b.correct += 1;
        }
    }
    Ok(buckets.into_values().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    JsonLines,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "report.md",
            ReportFormat::Csv => "report.csv",
            ReportFormat::JsonLines => "report.jsonl",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// One decimal, with negative zero printed as `0.0`.
pub fn fmt1(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".to_owned()
    } else {
        s
    }
}

fn round1(x: f64) -> f64 {
    fmt1(x).parse().expect("formatted float parses")
}

fn opt1(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), fmt1)
}

/// en first, then MaRVL languages in table order, then anything else.
fn column_order(report: &EvalReport) -> Vec<&Language> {
    let rank = |l: &Language| {
        if l.is_english() {
            0
        } else if let Some(i) = MARVL_LANGUAGES.iter().position(|m| *m == l.as_str()) {
            1 + i
        } else {
            1 + MARVL_LANGUAGES.len()
        }
    };
    let mut langs: Vec<&Language> = report.per_language.keys().collect();
    langs.sort_by_key(|l| (rank(l), l.as_str().to_owned()));
    langs
}

fn column_title(lang: &Language) -> String {
    if lang.is_english() {
        "NLVR2-en".to_owned()
    } else {
        lang.to_string()
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::JsonLines => render_jsonl(report),
    }
}

fn render_markdown(report: &EvalReport) -> String {
    let langs = column_order(report);
    let mut headers = vec!["Strategy".to_owned()];
    headers.extend(langs.iter().map(|l| column_title(l)));
    headers.push("MaRVL-Avg.".into());
    headers.push("MaRVL-Avg. - EN".into());

    let mut out = String::new();
    let _ = writeln!(out, "| {} |", headers.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(headers.len()));
    if !langs.is_empty() {
        let mut cells = vec![report.strategy.clone().unwrap_or_else(|| "-".into())];
        cells.extend(langs.iter().map(|l| fmt1(report.per_language[*l].accuracy)));
        cells.push(opt1(report.marvl_average));
        cells.push(opt1(report.gap));
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    if let Some(table) = &report.length_table {
        out.push_str("\n| Words | n | Accuracy |\n|---|---|---|\n");
        for b in table {
            let _ = writeln!(out, "| {}-{} | {} | {} |", b.low, b.high, b.n, fmt1(b.accuracy()));
        }
    }
    out
}

fn render_csv(report: &EvalReport) -> String {
    let strategy = report.strategy.as_deref().unwrap_or("");
    let mut out = String::from("strategy,section,key,n,correct,value\n");
    for lang in column_order(report) {
        let s = &report.per_language[lang];
        let (n, c) = s.counts.map_or((String::new(), String::new()), |c| {
            (c.n.to_string(), c.correct.to_string())
        });
        let _ = writeln!(out, "{strategy},language,{lang},{n},{c},{}", fmt1(s.accuracy));
    }
    if let Some(avg) = report.marvl_average {
        let _ = writeln!(out, "{strategy},summary,marvl_average,,,{}", fmt1(avg));
    }
    if let Some(gap) = report.gap {
        let _ = writeln!(out, "{strategy},summary,gap_vs_en,,,{}", fmt1(gap));
    }
    if let Some(table) = &report.length_table {
        for b in table {
            let _ = writeln!(
                out,
                "{strategy},length,{}-{},{},{},{}",
                b.low,
                b.high,
                b.n,
                b.correct,
                fmt1(b.accuracy())
            );
        }
    }
    out
}

fn render_jsonl(report: &EvalReport) -> String {
    let mut out = String::new();
    for lang in column_order(report) {
        let s = &report.per_language[lang];
        let line = json!({
            "record": "language",
            "strategy": report.strategy,
            "language": lang.as_str(),
            "n": s.counts.map(|c| c.n),
            "correct": s.counts.map(|c| c.correct),
            "accuracy": round1(s.accuracy),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    let summary = json!({
        "record": "summary",
        "strategy": report.strategy,
        "english_accuracy": report.english_accuracy.map(round1),
        "marvl_average": report.marvl_average.map(round1),
        "gap": report.gap.map(round1),
    });
    out.push_str(&summary.to_string());
    out.push('\n');
    if let Some(table) = &report.length_table {
        for b in table {
            let line = json!({
                "record": "length_bucket",
                "low": b.low,
                "high": b.high,
                "n": b.n,
                "correct": b.correct,
                "accuracy": round1(b.accuracy()),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

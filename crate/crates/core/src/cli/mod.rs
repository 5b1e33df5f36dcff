//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid program or failed execution, 2 bad
//! configuration or usage, 3 dataset problems, 4 fatal backend errors.
//! Every command writes through the writers it is handed, so runs can be
//! checked in-process.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;
use thiserror::Error;

use crate::clients::ScriptedBackend;
use crate::dataset::{load_dataset, load_dataset_with, Dataset, Language};
use crate::dsl::parse_program;
use crate::eval::{aggregate_counts, length_analysis, render_report, score, EvalReport, LengthError, ReportFormat};
use crate::interp::{execute, ModuleRegistry};
use crate::pipelines::{parse_predictions_jsonl, predictions_to_jsonl, run_all, FailureKind, Prediction, Strategy};
use config::{resolve_datasets, FileConfig, Overrides, RunConfig};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_FORMATS: [ReportFormat; 3] = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::JsonLines];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("backend error: {0}")]
    BackendFatal(String),
    #[error("{0}")]
    Program(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Program(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Dataset(_) => 3,
            CliError::BackendFatal(_) => 4,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "mvreason",
    version,
    about = "Multilingual visual reasoning pipelines and reports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a strategy over the configured datasets and write predictions and reports.
    Run(RunArgs),
    /// Parse a visual program and print its syntax tree.
    Parse { program: PathBuf },
    /// Execute a visual program on one image pair with scripted VQA answers.
    Exec {
        program: PathBuf,
        /// JSONL script of VQA replies.
        #[arg(long)]
        vqa: PathBuf,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Re-score a predictions file and render the report.
    Report(ReportArgs),
    /// Check a dataset file and print its per-language counts.
    ValidateDataset {
        path: PathBuf,
        #[arg(long, value_parser = Language::parse)]
        language: Option<Language>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run a seeded random subset of this many examples.
    #[arg(long)]
    pub sample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Restrict to this language's dataset.
    #[arg(long, value_parser = Language::parse)]
    pub language: Option<Language>,
    #[arg(long)]
    pub bucket_width: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Require a prediction for every example (`--strict=false` to relax).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub predictions: PathBuf,
    /// Config whose datasets hold the gold labels.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Format printed to stdout when `--out` is not given.
    #[arg(long, default_value = "markdown")]
    pub format: ReportFormat,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            strategy: self.strategy,
            language: self.common.language.clone(),
            max_in_flight: self.max_in_flight,
            bucket_width: self.common.bucket_width,
            out: self.common.out.clone(),
            strict: self.common.strict,
            template_dir: self.template_dir.clone(),
            seed: self.seed,
            sample: self.sample,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Run(args) => cmd_run(&args.config, &args.overrides(), out),
        Command::Parse { program } => cmd_parse(&program, out),
        Command::Exec {
            program,
            vqa,
            left,
            right,
        } => cmd_exec(&program, &vqa, &left, &right, out),
        Command::Report(args) => cmd_report(&args, out),
        Command::ValidateDataset { path, language } => cmd_validate_dataset(&path, language.as_ref(), out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn load_datasets(
    datasets: &std::collections::BTreeMap<Language, PathBuf>,
    languages: &crate::dataset::LanguageSet,
) -> Result<Dataset, CliError> {
    let parts = datasets
        .iter()
        .map(|(lang, path)| {
            load_dataset_with(path, Some(lang), languages)
                .map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::concat(parts).map_err(|e| CliError::Dataset(e.to_string()))
}

/// Keeps a seeded random subset of `n` examples, in their original order.
fn sample_dataset(dataset: Dataset, n: usize, seed: u64) -> Result<Dataset, CliError> {
    if n >= dataset.len() {
        return Ok(dataset);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, dataset.len(), n).into_vec();
    keep.sort_unstable();
    let source = dataset.source_path.clone();
    let examples = keep.into_iter().map(|i| dataset.examples[i].clone()).collect();
    Dataset::from_examples(examples, source).map_err(|e| CliError::Dataset(e.to_string()))
}

/// Scores predictions and attaches the length table when every statement has English text.
pub fn build_report(
    predictions: &[Prediction],
    dataset: &Dataset,
    strategy: Option<Strategy>,
    strict: bool,
    bucket_width: usize,
) -> Result<EvalReport, CliError> {
    let counts = score(predictions, dataset, strict).map_err(|e| CliError::Dataset(e.to_string()))?;
    let mut report = aggregate_counts(&counts, None);
    report.strategy = strategy.map(|s| s.as_str().to_owned());
    report.length_table = match length_analysis(predictions, dataset, bucket_width) {
        Ok(table) => Some(table),
        Err(LengthError::MissingTranslation(id)) => {
            log::info!("length table omitted: example {id} has no English statement");
            None
        }
        Err(e) => return Err(CliError::Dataset(e.to_string())),
    };
    Ok(report)
}

fn write_reports(dir: &Path, report: &EvalReport) -> Result<(), CliError> {
    for format in REPORT_FORMATS {
        let path = dir.join(format.file_name());
        fs::write(&path, render_report(report, format)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

pub fn cmd_run(config_path: &Path, overrides: &Overrides, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(FileConfig::load(config_path)?, overrides)?;
    let templates = cfg.load_templates()?;
    let pipeline = cfg.build_pipeline(&templates)?;
    let mut dataset = load_datasets(&cfg.datasets, &cfg.languages)?;
    if let Some(n) = cfg.sample {
        dataset = sample_dataset(dataset, n, cfg.seed)?;
    }
    log::info!(
        "running {} over {} examples with at most {} in flight",
        cfg.strategy,
        dataset.len(),
        cfg.max_in_flight
    );

    let predictions = run_all(&pipeline, &dataset.examples, cfg.max_in_flight);
    let report = build_report(&predictions, &dataset, Some(cfg.strategy), cfg.strict, cfg.bucket_width)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let pred_path = cfg.output_dir.join(PREDICTIONS_FILE);
    fs::write(&pred_path, predictions_to_jsonl(&predictions)).map_err(|e| io_err(&pred_path, e))?;
    write_reports(&cfg.output_dir, &report)?;

    let failed = predictions.iter().filter(|p| p.is_failed()).count();
    write_out(out, &render_report(&report, ReportFormat::Markdown))?;
    write_out(
        out,
        &format!(
            "\n{} predictions ({failed} failed) written to {}\n",
            predictions.len(),
            cfg.output_dir.display()
        ),
    )?;

    let auth = predictions
        .iter()
        .filter_map(|p| p.verdict.failure())
        .find(|f| f.kind == FailureKind::Auth);
    match auth {
        Some(f) => Err(CliError::BackendFatal(f.message.clone())),
        None => Ok(0),
    }
}

pub fn cmd_parse(program_path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let source = fs::read_to_string(program_path).map_err(|e| io_err(program_path, e))?;
    let program = parse_program(&source).map_err(|e| CliError::Program(format!("{}: {e}", program_path.display())))?;
    write_out(out, &format!("{program:#?}\n"))?;
    Ok(0)
}

pub fn cmd_exec(
    program_path: &Path,
    vqa_script: &Path,
    left: &str,
    right: &str,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let source = fs::read_to_string(program_path).map_err(|e| io_err(program_path, e))?;
    let program = parse_program(&source).map_err(|e| CliError::Program(format!("{}: {e}", program_path.display())))?;
    let vqa = ScriptedBackend::from_file(vqa_script, true, None)
        .map_err(|e| CliError::Config(format!("{}: {e}", vqa_script.display())))?;
    match execute(&program, left, right, &ModuleRegistry::core(Arc::new(vqa))) {
        Ok((verdict, trace)) => {
            write_out(out, &trace.to_jsonl())?;
            write_out(out, &format!("verdict: {}\n", if verdict { "True" } else { "False" }))?;
            Ok(0)
        }
        Err(failure) => {
            write_out(out, &failure.trace.to_jsonl())?;
            Err(CliError::Program(format!("execution failed: {}", failure.error)))
        }
    }
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = FileConfig::load(&args.config)?;
    let overrides = Overrides {
        language: args.common.language.clone(),
        ..Overrides::default()
    };
    let (datasets, languages) = resolve_datasets(&file, &overrides)?;
    let dataset = load_datasets(&datasets, &languages)?;

    let text = fs::read_to_string(&args.predictions).map_err(|e| io_err(&args.predictions, e))?;
    let mut predictions = parse_predictions_jsonl(&text)
        .map_err(|e| CliError::Dataset(format!("{}: {e}", args.predictions.display())))?;
    if args.common.language.is_some() {
        predictions.retain(|p| dataset.get(&p.example_id).is_some());
    }
    let strategy = predictions.first().map(|p| p.strategy);
    let strict = args.common.strict.or(file.strict).unwrap_or(true);
    let bucket_width = args
        .common
        .bucket_width
        .or(file.bucket_width)
        .unwrap_or(crate::eval::DEFAULT_BUCKET_WIDTH);
    if bucket_width == 0 {
        return Err(CliError::Config("bucket_width must be at least 1".into()));
    }
    let report = build_report(&predictions, &dataset, strategy, strict, bucket_width)?;

    match &args.common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            write_reports(dir, &report)?;
        }
        None => write_out(out, &render_report(&report, args.format))?,
    }
    Ok(0)
}

pub fn cmd_validate_dataset(path: &Path, language: Option<&Language>, out: &mut dyn Write) -> Result<i32, CliError> {
    let dataset = load_dataset(path, language).map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))?;
    let mut text = format!("{}: {} examples\n", path.display(), dataset.len());
    for (lang, n) in &dataset.language_histogram {
        text.push_str(&format!("  {lang}: {n}\n"));
    }
    write_out(out, &text)?;
    Ok(0)
}

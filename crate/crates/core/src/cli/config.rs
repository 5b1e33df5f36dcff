//! Run configuration: a TOML file, command-line overrides, and the backends
//! they describe.
//!
//! Relative paths in the file are resolved against the file's directory.
//! Credentials never come from the file; HTTP backends read them from
//! `MVREASON_API_KEY_<NAME>` or `MVREASON_API_KEY`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::CliError;
use crate::clients::{
    BackendConfig, ChatBackend, ChatTranslator, HttpChatBackend, HttpTranslator, ScriptedBackend, ScriptedTranslator,
    Secret, Translator,
};
use crate::dataset::{Language, LanguageSet};
use crate::eval::DEFAULT_BUCKET_WIDTH;
use crate::pipelines::{Pipeline, Strategy, TemplateKind, Templates, DEFAULT_MAX_IN_FLIGHT};

pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const DEFAULT_STRATEGY: Strategy = Strategy::EndToEnd;

/// Every role name a strategy can require.
pub const ROLES: [&str; 7] = [
    "vision",
    "translator",
    "codegen",
    "vqa",
    "instruction",
    "caption",
    "reasoning",
];

/// The file as written, before defaults and overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub datasets: BTreeMap<String, PathBuf>,
    pub strategy: Option<String>,
    #[serde(default)]
    pub languages: Vec<String>,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub roles: BTreeMap<String, String>,
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub templates: BTreeMap<String, PathBuf>,
    pub max_in_flight: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub bucket_width: Option<usize>,
    pub strict: Option<bool>,
    pub seed: Option<u64>,
    /// Run only this many examples, drawn with `seed`.
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Replies looked up by request fingerprint from a JSONL script.
    Scripted {
        script: PathBuf,
        #[serde(default = "yes")]
        strict: bool,
        default_reply: Option<String>,
    },
    /// OpenAI-compatible chat-completions endpoint.
    Http(HttpSpec),
    /// Translator returning its input unchanged.
    Identity,
    ScriptedTranslator {
        script: PathBuf,
        #[serde(default)]
        identity_fallback: bool,
    },
    /// Translator prompting the named chat backend with the translate template.
    ChatTranslator {
        backend: String,
    },
    HttpTranslator(HttpSpec),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpSpec {
    pub base_url: String,
    #[serde(default)]
    pub model: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub image_root: Option<PathBuf>,
}

impl BackendSpec {
    fn is_translator(&self) -> bool {
        matches!(
            self,
            BackendSpec::Identity
                | BackendSpec::ScriptedTranslator { .. }
                | BackendSpec::ChatTranslator { .. }
                | BackendSpec::HttpTranslator(_)
        )
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub strategy: Option<Strategy>,
    pub language: Option<Language>,
    pub max_in_flight: Option<usize>,
    pub bucket_width: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: Option<bool>,
    pub template_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sample: Option<usize>,
}

/// A validated configuration with every path absolute or cwd-relative.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub datasets: BTreeMap<Language, PathBuf>,
    pub languages: LanguageSet,
    pub strategy: Strategy,
    pub backends: BTreeMap<String, BackendSpec>,
    pub roles: BTreeMap<String, String>,
    pub template_dir: Option<PathBuf>,
    pub templates: BTreeMap<String, PathBuf>,
    pub max_in_flight: usize,
    pub output_dir: PathBuf,
    pub bucket_width: usize,
    pub strict: bool,
    pub seed: u64,
    pub sample: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Replaces every double-quoted span with `"…"`.
fn redact_strings(message: &str) -> String {
    let mut out = String::with_capacity(message.len());
    let mut inside = false;
    for c in message.chars() {
        if c == '"' {
            if inside {
                out.push_str("…\"");
            } else {
                out.push('"');
            }
            inside = !inside;
        } else if !inside {
            out.push(c);
        }
    }
    out
}

fn require_file(what: &str, p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(config_err(format!("{what} {} does not exist", p.display())))
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        // The default rendering quotes the offending source line, and the
        // message itself may quote a mistyped string value; show neither.
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let message = redact_strings(e.message());
            match e.span().map(|s| text[..s.start].matches('\n').count() + 1) {
                Some(line) => config_err(format!("invalid config at line {line}: {message}")),
                None => config_err(format!("invalid config: {message}")),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Makes every relative path relative to `base` instead.
    pub fn rebase(&mut self, base: &Path) {
        for p in self.datasets.values_mut() {
            *p = rebase(base, p);
        }
        for p in self.templates.values_mut() {
            *p = rebase(base, p);
        }
        for p in [&mut self.template_dir, &mut self.output_dir].into_iter().flatten() {
            *p = rebase(base, p);
        }
        for spec in self.backends.values_mut() {
            match spec {
                BackendSpec::Scripted { script, .. } | BackendSpec::ScriptedTranslator { script, .. } => {
                    *script = rebase(base, script);
                }
                BackendSpec::Http(h) | BackendSpec::HttpTranslator(h) => {
                    if let Some(root) = &mut h.image_root {
                        *root = rebase(base, root);
                    }
                }
                BackendSpec::Identity | BackendSpec::ChatTranslator { .. } => {}
            }
        }
    }
}

/// The dataset map (filtered by `--language`) and the language set it must respect.
pub fn resolve_datasets(
    file: &FileConfig,
    overrides: &Overrides,
) -> Result<(BTreeMap<Language, PathBuf>, LanguageSet), CliError> {
    let languages = if file.languages.is_empty() {
        LanguageSet::default()
    } else {
        LanguageSet::new(&file.languages).map_err(config_err)?
    };
    let mut datasets = BTreeMap::new();
    for (code, path) in &file.datasets {
        let lang = Language::parse(code).map_err(|e| config_err(format!("datasets: {e}")))?;
        if !languages.contains(&lang) {
            return Err(config_err(format!(
                "datasets: language `{lang}` is not in the configured set"
            )));
        }
        require_file("dataset", path)?;
        datasets.insert(lang, path.clone());
    }
    if let Some(only) = &overrides.language {
        datasets.retain(|lang, _| lang == only);
        if datasets.is_empty() {
            return Err(config_err(format!("no dataset configured for language `{only}`")));
        }
    }
    Ok((datasets, languages))
}

impl RunConfig {
    /// Applies precedence (overrides, then file, then defaults) and validates.
    pub fn resolve(file: FileConfig, overrides: &Overrides) -> Result<Self, CliError> {
        let strategy = match (overrides.strategy, &file.strategy) {
            (Some(s), _) => s,
            (None, Some(name)) => name.parse().map_err(config_err)?,
            (None, None) => DEFAULT_STRATEGY,
        };

        let (datasets, languages) = resolve_datasets(&file, overrides)?;

        let cfg = Self {
            datasets,
            languages,
            strategy,
            backends: file.backends,
            roles: file.roles,
            template_dir: overrides.template_dir.clone().or(file.template_dir),
            templates: file.templates,
            max_in_flight: overrides
                .max_in_flight
                .or(file.max_in_flight)
                .unwrap_or(DEFAULT_MAX_IN_FLIGHT),
            output_dir: overrides
                .out
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            bucket_width: overrides
                .bucket_width
                .or(file.bucket_width)
                .unwrap_or(DEFAULT_BUCKET_WIDTH),
            strict: overrides.strict.or(file.strict).unwrap_or(true),
            seed: overrides.seed.or(file.seed).unwrap_or(0),
            sample: overrides.sample.or(file.sample),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.max_in_flight == 0 {
            return Err(config_err("max_in_flight must be at least 1"));
        }
        if self.bucket_width == 0 {
            return Err(config_err("bucket_width must be at least 1"));
        }
        if let Some(dir) = &self.template_dir {
            if !dir.is_dir() {
                return Err(config_err(format!("template_dir {} does not exist", dir.display())));
            }
        }
        for (name, path) in &self.templates {
            template_kind(name)?;
            require_file("template", path)?;
        }
        for (name, spec) in &self.backends {
            match spec {
                BackendSpec::Scripted { script, .. } | BackendSpec::ScriptedTranslator { script, .. } => {
                    require_file(&format!("script for backend `{name}`:"), script)?;
                }
                BackendSpec::ChatTranslator { backend } => match self.backends.get(backend) {
                    Some(inner) if !inner.is_translator() => {}
                    _ => {
                        return Err(config_err(format!(
                            "backend `{name}`: `{backend}` is not a configured chat backend"
                        )))
                    }
                },
                _ => {}
            }
        }
        for (role, backend) in &self.roles {
            if !ROLES.contains(&role.as_str()) {
                return Err(config_err(format!("unknown role `{role}`")));
            }
            let Some(spec) = self.backends.get(backend) else {
                return Err(config_err(format!("role `{role}` names unknown backend `{backend}`")));
            };
            let wants_translator = role == "translator";
            if spec.is_translator() != wants_translator {
                let expected = if wants_translator {
                    "a translator"
                } else {
                    "a chat backend"
                };
                return Err(config_err(format!(
                    "role `{role}` needs {expected}, but `{backend}` is not"
                )));
            }
        }
        for role in self.strategy.roles() {
            if !self.roles.contains_key(*role) {
                return Err(config_err(format!(
                    "strategy {} needs a backend bound to role `{role}`",
                    self.strategy
                )));
            }
        }
        Ok(())
    }

    pub fn load_templates(&self) -> Result<Templates, CliError> {
        let mut t = match &self.template_dir {
            Some(dir) => Templates::from_dir(dir).map_err(|e| config_err(e.to_string()))?,
            None => Templates::default(),
        };
        for (name, path) in &self.templates {
            t.override_with(template_kind(name)?, path)
                .map_err(|e| config_err(e.to_string()))?;
        }
        Ok(t)
    }

    /// Builds the configured strategy with its role-bound backends.
    pub fn build_pipeline(&self, templates: &Templates) -> Result<Pipeline, CliError> {
        let mut built = Built::default();
        let chat = |role: &str, built: &mut Built| self.chat_for_role(role, built);
        let translator = |built: &mut Built| self.translator_for_role(built, templates);
        Ok(match self.strategy {
            Strategy::EndToEnd => Pipeline::EndToEnd {
                vision: chat("vision", &mut built)?,
                template: templates.end_to_end.clone(),
            },
            Strategy::TranslateTest => Pipeline::TranslateTest {
                translator: translator(&mut built)?,
                vision: chat("vision", &mut built)?,
                template: templates.end_to_end.clone(),
            },
            Strategy::VisProg => Pipeline::VisProg {
                translator: translator(&mut built)?,
                codegen: chat("codegen", &mut built)?,
                vqa: chat("vqa", &mut built)?,
                template: templates.codegen.clone(),
            },
            Strategy::CaptionReason => Pipeline::CaptionReason {
                translator: translator(&mut built)?,
                instruction: chat("instruction", &mut built)?,
                caption: chat("caption", &mut built)?,
                reasoning: chat("reasoning", &mut built)?,
                instructions_template: templates.instructions.clone(),
                caption_template: templates.caption.clone(),
                reasoning_template: templates.reasoning.clone(),
            },
        })
    }

    fn chat_for_role(&self, role: &str, built: &mut Built) -> Result<Arc<dyn ChatBackend>, CliError> {
        let name = &self.roles[role];
        self.chat_backend(name, built)
    }

    fn chat_backend(&self, name: &str, built: &mut Built) -> Result<Arc<dyn ChatBackend>, CliError> {
        if let Some(b) = built.chat.get(name) {
            return Ok(Arc::clone(b));
        }
        let backend: Arc<dyn ChatBackend> = match &self.backends[name] {
            BackendSpec::Scripted {
                script,
                strict,
                default_reply,
            } => Arc::new(
                ScriptedBackend::from_file(script, *strict, default_reply.clone())
                    .map_err(|e| config_err(format!("backend `{name}`: {e}")))?,
            ),
            BackendSpec::Http(h) => Arc::new(
                HttpChatBackend::new(http_config(name, h)?)
                    .map_err(|e| CliError::BackendFatal(format!("backend `{name}`: {e}")))?,
            ),
            _ => unreachable!("roles are checked to bind chat backends"),
        };
        built.chat.insert(name.to_owned(), Arc::clone(&backend));
        Ok(backend)
    }

    fn translator_for_role(&self, built: &mut Built, templates: &Templates) -> Result<Arc<dyn Translator>, CliError> {
        let name = &self.roles["translator"];
        Ok(match &self.backends[name] {
            BackendSpec::Identity => Arc::new(ScriptedTranslator::identity()),
            BackendSpec::ScriptedTranslator {
                script,
                identity_fallback,
            } => Arc::new(
                ScriptedTranslator::from_file(script, *identity_fallback)
                    .map_err(|e| config_err(format!("backend `{name}`: {e}")))?,
            ),
            BackendSpec::ChatTranslator { backend } => Arc::new(ChatTranslator::new(
                self.chat_backend(backend, built)?,
                templates.translate.clone(),
                self.languages.clone(),
            )),
            BackendSpec::HttpTranslator(h) => Arc::new(
                HttpTranslator::new(http_config(name, h)?, self.languages.clone())
                    .map_err(|e| CliError::BackendFatal(format!("backend `{name}`: {e}")))?,
            ),
            _ => unreachable!("the translator role is checked to bind a translator"),
        })
    }
}

#[derive(Default)]
struct Built {
    chat: BTreeMap<String, Arc<dyn ChatBackend>>,
}

fn template_kind(name: &str) -> Result<TemplateKind, CliError> {
    TemplateKind::ALL
        .into_iter()
        .find(|k| k.file_stem() == name)
        .ok_or_else(|| config_err(format!("unknown template `{name}`")))
}

fn http_config(name: &str, h: &HttpSpec) -> Result<BackendConfig, CliError> {
    let mut cfg = BackendConfig::new(name, h.base_url.clone(), h.model.clone());
    if let Some(t) = h.temperature {
        cfg.temperature = t;
    }
    if let Some(m) = h.max_tokens {
        cfg.max_tokens = m;
    }
    if let Some(s) = h.timeout_secs {
        cfg.timeout = Duration::from_secs(s);
    }
    if let Some(r) = h.max_retries {
        cfg.max_retries = r;
    }
    cfg.image_root = h.image_root.clone();
    cfg.credential = Secret::from_env(name);
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

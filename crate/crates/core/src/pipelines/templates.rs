use std::path::Path;

use crate::template::{PromptTemplate, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    EndToEnd,
    Translate,
    Codegen,
    Instructions,
    Caption,
    Reasoning,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 6] = [
        TemplateKind::EndToEnd,
        TemplateKind::Translate,
        TemplateKind::Codegen,
        TemplateKind::Instructions,
        TemplateKind::Caption,
        TemplateKind::Reasoning,
    ];

    /// File stem inside a template directory.
    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateKind::EndToEnd => "end_to_end",
            TemplateKind::Translate => "translate",
            TemplateKind::Codegen => "codegen",
            TemplateKind::Instructions => "instructions",
            TemplateKind::Caption => "caption",
            TemplateKind::Reasoning => "reasoning",
        }
    }

    pub fn required(self) -> &'static [&'static str] {
        match self {
            TemplateKind::EndToEnd => &["statement"],
            TemplateKind::Translate => &["statement"],
            TemplateKind::Codegen => &["statement", "grammar"],
            TemplateKind::Instructions => &["statement"],
            TemplateKind::Caption => &["instruction"],
            TemplateKind::Reasoning => &["statement", "caption_left", "caption_right"],
        }
    }

    fn default_body(self) -> &'static str {
        match self {
            TemplateKind::EndToEnd => include_str!("../../templates/end_to_end.txt"),
            TemplateKind::Translate => include_str!("../../templates/translate.txt"),
            TemplateKind::Codegen => include_str!("../../templates/codegen.txt"),
            TemplateKind::Instructions => include_str!("../../templates/instructions.txt"),
            TemplateKind::Caption => include_str!("../../templates/caption.txt"),
            TemplateKind::Reasoning => include_str!("../../templates/reasoning.txt"),
        }
    }

    pub fn default_template(self) -> PromptTemplate {
        PromptTemplate::new(self.file_stem(), self.default_body(), self.required())
            .expect("bundled templates are valid")
    }
}

/// The prompt set used by all strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub end_to_end: PromptTemplate,
    pub translate: PromptTemplate,
    pub codegen: PromptTemplate,
    pub instructions: PromptTemplate,
    pub caption: PromptTemplate,
    pub reasoning: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            end_to_end: TemplateKind::EndToEnd.default_template(),
            translate: TemplateKind::Translate.default_template(),
            codegen: TemplateKind::Codegen.default_template(),
            instructions: TemplateKind::Instructions.default_template(),
            caption: TemplateKind::Caption.default_template(),
            reasoning: TemplateKind::Reasoning.default_template(),
        }
    }
}

impl Templates {
    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::EndToEnd => &self.end_to_end,
            TemplateKind::Translate => &self.translate,
            TemplateKind::Codegen => &self.codegen,
            TemplateKind::Instructions => &self.instructions,
            TemplateKind::Caption => &self.caption,
            TemplateKind::Reasoning => &self.reasoning,
        }
    }

    fn slot(&mut self, kind: TemplateKind) -> &mut PromptTemplate {
        match kind {
            TemplateKind::EndToEnd => &mut self.end_to_end,
            TemplateKind::Translate => &mut self.translate,
            TemplateKind::Codegen => &mut self.codegen,
            TemplateKind::Instructions => &mut self.instructions,
            TemplateKind::Caption => &mut self.caption,
            TemplateKind::Reasoning => &mut self.reasoning,
        }
    }

    /// Defaults, overridden by any `<stem>.txt` present in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        if !dir.is_dir() {
            return Err(TemplateError::Io {
                path: dir.display().to_string(),
                message: "not a directory".into(),
            });
        }
        let mut t = Self::default();
        for kind in TemplateKind::ALL {
            let path = dir.join(format!("{}.txt", kind.file_stem()));
            if path.exists() {
                *t.slot(kind) = PromptTemplate::from_file(&path, kind.required())?;
            }
        }
        Ok(t)
    }

    /// Replaces one template from an explicit file, which must exist.
    pub fn override_with(&mut self, kind: TemplateKind, path: &Path) -> Result<(), TemplateError> {
        *self.slot(kind) = PromptTemplate::from_file(path, kind.required())?;
        Ok(())
    }
}

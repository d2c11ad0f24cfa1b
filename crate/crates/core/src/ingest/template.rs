use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TaskInstance;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template '{id}': body must contain {{{placeholder}}} exactly once (found {count})")]
    Placeholder {
        id: String,
        placeholder: &'static str,
        count: usize,
    },
    #[error("template '{template}' references {{choices}} but instance '{instance}' has none")]
    MissingChoices { template: String, instance: String },
    #[error("unknown template '{0}'")]
    Unknown(String),
    #[error("cannot read template file {path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_preamble: Option<String>,
}

impl PromptTemplate {
    pub fn new(
        template_id: impl Into<String>,
        body: impl Into<String>,
        system_preamble: Option<String>,
    ) -> Result<Self, TemplateError> {
        let t = Self {
            template_id: template_id.into(),
            body: body.into(),
            system_preamble,
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), TemplateError> {
        for placeholder in ["context", "question"] {
            let count = self.body.matches(&format!("{{{placeholder}}}")).count();
            if count != 1 {
                return Err(TemplateError::Placeholder {
                    id: self.template_id.clone(),
                    placeholder,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn uses_choices(&self) -> bool {
        self.body.contains("{choices}")
    }

    /// Reads a TOML template file with `template_id`, `body` and optional
    /// `system_preamble` keys.
    pub fn from_file(path: &Path) -> Result<Self, TemplateError> {
        let load = |reason: String| TemplateError::Load {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load(e.to_string()))?;
        let t: PromptTemplate = toml::from_str(&text).map_err(|e| load(e.to_string()))?;
        t.check()?;
        Ok(t)
    }
}

/// Substitutes `{name}` placeholders in a single left-to-right pass, so text
/// inserted for one placeholder is never re-expanded. Unrecognised braces are
/// copied through.
pub fn fill_placeholders(body: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(body.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = body;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let hit = values.iter().find(|(name, _)| {
            tail.len() > name.len() + 1
                && tail[1..].starts_with(name)
                && tail[1 + name.len()..].starts_with('}')
        });
        match hit {
            Some((name, value)) => {
                out.push_str(value);
                rest = &tail[name.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// `LABEL. text` per line.
pub fn render_choices(choices: &[(String, String)]) -> String {
    choices
        .iter()
        .map(|(label, text)| format!("{label}. {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the user message for an instance.
pub fn apply_template(t: &PromptTemplate, inst: &TaskInstance) -> Result<String, TemplateError> {
    let choices = match (&inst.choices, t.uses_choices()) {
        (Some(c), true) => render_choices(c),
        (None, true) => {
            return Err(TemplateError::MissingChoices {
                template: t.template_id.clone(),
                instance: inst.instance_id.clone(),
            })
        }
        (_, false) => String::new(),
    };
    Ok(fill_placeholders(
        &t.body,
        &[
            ("context", inst.context.as_str()),
            ("question", inst.question.as_str()),
            ("choices", choices.as_str()),
        ],
    ))
}

/// Named templates: the built-in set plus any registered at runtime.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let builtin = [
            (
                "default",
                "{context}\n\nAnswer the question based on the text above.\nQuestion: {question}\nAnswer:",
            ),
            (
                "multiple_choice",
                "{context}\n\nQuestion: {question}\n{choices}\nAnswer with the letter of the correct option.",
            ),
            (
                "citation",
                "{context}\n\nAnswer the question and cite the supporting passages as [i].\nQuestion: {question}\nAnswer:",
            ),
        ];
        let mut reg = Self {
            templates: BTreeMap::new(),
        };
        for (id, body) in builtin {
            reg.insert(PromptTemplate::new(id, body, None).expect("builtin template is valid"));
        }
        reg
    }
}

impl TemplateRegistry {
    pub fn insert(&mut self, t: PromptTemplate) {
        self.templates.insert(t.template_id.clone(), t);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(id)
            .ok_or_else(|| TemplateError::Unknown(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

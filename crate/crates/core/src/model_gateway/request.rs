use std::fmt;

use serde::{Deserialize, Serialize};

use crate::prompts::section;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;

/// The role a policy call plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RequestKind {
    ActionSelection,
    SqlCompletion,
    NlDescription,
    KeywordExtraction,
    ContextExpansion,
    FidelityJudgment,
}

impl RequestKind {
    pub const ALL: [RequestKind; 6] = [
        RequestKind::ActionSelection,
        RequestKind::SqlCompletion,
        RequestKind::NlDescription,
        RequestKind::KeywordExtraction,
        RequestKind::ContextExpansion,
        RequestKind::FidelityJudgment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::ActionSelection => "ActionSelection",
            RequestKind::SqlCompletion => "SqlCompletion",
            RequestKind::NlDescription => "NlDescription",
            RequestKind::KeywordExtraction => "KeywordExtraction",
            RequestKind::ContextExpansion => "ContextExpansion",
            RequestKind::FidelityJudgment => "FidelityJudgment",
        }
    }

    /// Sections a request of this kind must carry:
    ///
    /// | kind              | required sections                 |
    /// |-------------------|-----------------------------------|
    /// | ActionSelection   | candidates                        |
    /// | SqlCompletion     | role, schema_context              |
    /// | NlDescription     | sql                               |
    /// | KeywordExtraction | question                          |
    /// | ContextExpansion  | question, schema_fragments        |
    /// | FidelityJudgment  | question, result_preview          |
    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            RequestKind::ActionSelection => &[section::CANDIDATES],
            RequestKind::SqlCompletion => &[section::ROLE, section::SCHEMA_CONTEXT],
            RequestKind::NlDescription => &[section::SQL],
            RequestKind::KeywordExtraction => &[section::QUESTION],
            RequestKind::ContextExpansion => &[section::QUESTION, section::SCHEMA_FRAGMENTS],
            RequestKind::FidelityJudgment => &[section::QUESTION, section::RESULT_PREVIEW],
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSection {
    pub title: String,
    pub body: String,
}

/// A structured prompt. Sections keep their insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub kind: RequestKind,
    pub sections: Vec<PromptSection>,
    pub temperature: f64,
}

impl PolicyRequest {
    pub fn new(kind: RequestKind) -> Self {
        PolicyRequest { kind, sections: Vec::new(), temperature: DEFAULT_TEMPERATURE }
    }

    pub fn section(mut self, title: &str, body: impl Into<String>) -> Self {
        self.sections.push(PromptSection { title: title.to_string(), body: body.into() });
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn get(&self, title: &str) -> Option<&str> {
        self.sections.iter().find(|s| s.title == title).map(|s| s.body.as_str())
    }

    pub fn missing_section(&self) -> Option<&'static str> {
        self.kind.required_sections().iter().copied().find(|t| self.get(t).is_none())
    }

    /// System message: the `role` section, if present.
    pub fn system_text(&self) -> Option<&str> {
        self.get(section::ROLE)
    }

    /// User message: every other section as `### title` followed by its body.
    pub fn user_text(&self) -> String {
        let mut out = String::new();
        for s in self.sections.iter().filter(|s| s.title != section::ROLE) {
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str("### ");
            out.push_str(&s.title);
            out.push('\n');
            out.push_str(&s.body);
        }
        out
    }

    /// Full prompt text in section order, the input of prompt digests.
    pub fn render(&self) -> String {
        match self.system_text() {
            Some(system) => format!("{system}\n\n{}", self.user_text()),
            None => self.user_text(),
        }
    }
}

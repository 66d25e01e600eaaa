//! System prompt templates and request rendering.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::verifier::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Direct,
    Repair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub version: &'static str,
    pub text: &'static str,
}

pub const DIRECT_TEMPLATE: PromptTemplate = PromptTemplate {
    kind: PromptKind::Direct,
    version: "v1",
    text: include_str!("../../../../data/prompts/direct.v1.txt"),
};

pub const REPAIR_TEMPLATE: PromptTemplate = PromptTemplate {
    kind: PromptKind::Repair,
    version: "v1",
    text: include_str!("../../../../data/prompts/repair.v1.txt"),
};

impl PromptTemplate {
    pub fn for_kind(kind: PromptKind) -> Self {
        match kind {
            PromptKind::Direct => DIRECT_TEMPLATE,
            PromptKind::Repair => REPAIR_TEMPLATE,
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// `kind@version#sha256-prefix`, recorded in reports.
    pub fn pin(&self) -> String {
        let kind = match self.kind {
            PromptKind::Direct => "direct",
            PromptKind::Repair => "repair",
        };
        format!("{kind}@{}#{}", self.version, &self.sha256()[..12])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("repair prompt requires nonempty verification errors")]
    EmptyErrors,
}

pub const BEGIN_DAFNY: &str = "BEGIN DAFNY";
pub const END_DAFNY: &str = "END DAFNY";
pub const BEGIN_ERRORS: &str = "BEGIN VERIFICATION ERRORS";
pub const END_ERRORS: &str = "END VERIFICATION ERRORS";

/// The program sits byte-exact between `BEGIN DAFNY\n` and `\nEND DAFNY`.
fn dafny_block(program: &str) -> String {
    format!("{BEGIN_DAFNY}\n{program}\n{END_DAFNY}\n")
}

pub fn render_direct_prompt(program: &str) -> Vec<Message> {
    vec![
        Message::system(DIRECT_TEMPLATE.text),
        Message::user(dafny_block(program)),
    ]
}

pub fn render_repair_prompt(program: &str, errors: &str) -> Result<Vec<Message>, PromptError> {
    if errors.trim().is_empty() {
        return Err(PromptError::EmptyErrors);
    }
    let user = format!(
        "{}{BEGIN_ERRORS}\n{}\n{END_ERRORS}\n",
        dafny_block(program),
        errors.trim_end_matches('\n')
    );
    Ok(vec![
        Message::system(REPAIR_TEMPLATE.text),
        Message::user(user),
    ])
}

/// One line per diagnostic in (file, line, col) order, keeping at most
/// `max_lines` lines; the earliest positions survive truncation.
pub fn render_diagnostics(diagnostics: &[Diagnostic], max_lines: usize) -> String {
    let mut sorted: Vec<&Diagnostic> = diagnostics.iter().collect();
    sorted.sort_by(|a, b| (&a.file, a.line, a.col).cmp(&(&b.file, b.line, b.col)));
    let mut out = String::new();
    for (i, d) in sorted.iter().enumerate() {
        if i == max_lines {
            out.push_str(&format!(
                "... {} more diagnostics omitted\n",
                sorted.len() - i
            ));
            break;
        }
        out.push_str(&d.to_string());
        out.push('\n');
    }
    out
}

/// The program text inside the first DAFNY block of a rendered user message.
pub fn program_in(user: &str) -> Option<&str> {
    let start = user.find(&format!("{BEGIN_DAFNY}\n"))? + BEGIN_DAFNY.len() + 1;
    let end = user.rfind(&format!("\n{END_DAFNY}\n"))?;
    Some(&user[start..end.max(start)])
}

/// The errors text inside the VERIFICATION ERRORS block, if any.
pub fn errors_in(user: &str) -> Option<&str> {
    let start = user.find(&format!("{BEGIN_ERRORS}\n"))? + BEGIN_ERRORS.len() + 1;
    let end = user.rfind(&format!("\n{END_ERRORS}"))?;
    Some(&user[start..end.max(start)])
}

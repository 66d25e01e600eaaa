//! Choosing the version to present when no attempt verified.

use serde::{Deserialize, Serialize};

use annot_core::llm::render_diagnostics;
use annot_core::repair_loop::AttemptRecord;
use annot_core::verifier::{Diagnostic, Severity, VerificationOutcome};

/// What ranking needs to know about one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<'a> {
    pub program: &'a str,
    pub obligations_verified: u32,
    pub diagnostics: &'a [Diagnostic],
}

impl Ranked<'_> {
    fn errors(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestEffort {
    /// 0-based position among the ranked attempts.
    pub index: usize,
    pub program: String,
    pub obligations_verified: u32,
    pub errors: usize,
    /// Summary line followed by the remaining diagnostics.
    pub explanation: String,
}

/// Most verified obligations first, then fewest errors, then the earliest
/// attempt. None when there is nothing to rank.
pub fn choose(attempts: &[Ranked<'_>], diagnostics_budget: usize) -> Option<BestEffort> {
    let index = (0..attempts.len()).min_by_key(|&i| {
        let a = &attempts[i];
        (std::cmp::Reverse(a.obligations_verified), a.errors(), i)
    })?;
    let a = &attempts[index];
    let errors = a.errors();
    let mut explanation = format!(
        "attempt {} verified {} proof obligations with {} remaining errors\n",
        index + 1,
        a.obligations_verified,
        errors
    );
    explanation.push_str(&render_diagnostics(a.diagnostics, diagnostics_budget));
    Some(BestEffort {
        index,
        program: a.program.to_string(),
        obligations_verified: a.obligations_verified,
        errors,
        explanation,
    })
}

pub fn from_outcomes<'a>(attempts: &'a [(String, VerificationOutcome)]) -> Vec<Ranked<'a>> {
    attempts
        .iter()
        .map(|(p, o)| Ranked {
            program: p,
            obligations_verified: o.obligations_verified,
            diagnostics: &o.diagnostics,
        })
        .collect()
}

/// Attempts that produced a verified-or-not program; cheating and empty
/// answers never reach the user.
pub fn from_records(records: &[AttemptRecord]) -> Vec<Ranked<'_>> {
    records
        .iter()
        .filter(|r| r.cheating_violations == 0)
        .filter_map(|r| {
            Some(Ranked {
                program: r.program.as_deref()?,
                obligations_verified: r.obligations_verified,
                diagnostics: &r.diagnostics,
            })
        })
        .collect()
}

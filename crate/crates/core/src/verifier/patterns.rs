//! Verifier output parsing driven by a pattern table shipped as data.

use regex::Regex;
use serde::Deserialize;

use super::{Diagnostic, DiagnosticCategory, Severity, VerificationOutcome, VerificationStatus};

const DEFAULT_TABLE: &str = include_str!("../../../../data/verifier_patterns.json");

#[derive(Debug, Clone, Deserialize)]
struct Rule {
    contains: String,
    category: DiagnosticCategory,
}

#[derive(Debug, Clone, Deserialize)]
struct RawTable {
    version: String,
    diagnostic: String,
    related: String,
    summary: String,
    output_rules: Vec<Rule>,
    message_rules: Vec<Rule>,
}

#[derive(Debug, Clone)]
pub struct PatternTable {
    pub version: String,
    diagnostic: Regex,
    related: Regex,
    summary: Regex,
    output_rules: Vec<Rule>,
    message_rules: Vec<Rule>,
}

impl PatternTable {
    pub fn from_json(json: &str) -> Result<Self, String> {
        let raw: RawTable =
            serde_json::from_str(json).map_err(|e| format!("pattern table: {e}"))?;
        let re = |s: &str| Regex::new(s).map_err(|e| format!("pattern table regex: {e}"));
        Ok(Self {
            version: raw.version,
            diagnostic: re(&raw.diagnostic)?,
            related: re(&raw.related)?,
            summary: re(&raw.summary)?,
            output_rules: raw.output_rules,
            message_rules: raw.message_rules,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text)
    }
}

impl Default for PatternTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("bundled pattern table is valid")
    }
}

/// Reads diagnostics, obligation counts and a status from verifier output.
/// `exit_ok` is whether the process exited with status 0.
pub fn parse_output(table: &PatternTable, output: &str, exit_ok: bool) -> VerificationOutcome {
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut summary: Option<(u32, u32)> = None;
    let whole_category = table
        .output_rules
        .iter()
        .find(|r| output.contains(&r.contains))
        .map(|r| r.category);

    for line in output.lines() {
        let line = line.trim_end();
        if let Some(c) = table.related.captures(line) {
            if let Some(prev) = diagnostics.last_mut() {
                let msg = c.name("message").map_or("", |m| m.as_str());
                prev.message.push_str(&format!(
                    " (related location {}({},{}){}{})",
                    &c["file"],
                    &c["line"],
                    &c["col"],
                    if msg.is_empty() { "" } else { ": " },
                    msg
                ));
            }
            continue;
        }
        if let Some(c) = table.diagnostic.captures(line) {
            let message = c["message"].to_string();
            let severity = if &c["severity"] == "Warning" {
                Severity::Warning
            } else {
                Severity::Error
            };
            let category = table
                .message_rules
                .iter()
                .find(|r| message.contains(&r.contains))
                .map(|r| r.category)
                .or(whole_category)
                .unwrap_or(DiagnosticCategory::Verification);
            diagnostics.push(Diagnostic {
                file: c["file"].trim().to_string(),
                line: c["line"].parse().unwrap_or(0),
                col: c["col"].parse().unwrap_or(0),
                severity,
                message,
                category,
            });
            continue;
        }
        if let Some(c) = table.summary.captures(line) {
            let n = |k: &str| {
                c.name(k)
                    .and_then(|m| m.as_str().parse::<u32>().ok())
                    .unwrap_or(0)
            };
            summary = Some((
                n("verified"),
                n("errors") + n("timeouts") + n("outofresource"),
            ));
            if n("timeouts") + n("outofresource") > 0
                && !diagnostics
                    .iter()
                    .any(|d| d.category == DiagnosticCategory::Timeout)
            {
                diagnostics.push(Diagnostic::error(
                    0,
                    0,
                    "verification timed out",
                    DiagnosticCategory::Timeout,
                ));
            }
        }
    }

    let errors = || diagnostics.iter().filter(|d| d.severity == Severity::Error);
    let status = if matches!(
        whole_category,
        Some(DiagnosticCategory::Parse | DiagnosticCategory::Resolution)
    ) || errors().any(|d| {
        matches!(
            d.category,
            DiagnosticCategory::Parse | DiagnosticCategory::Resolution
        )
    }) {
        VerificationStatus::SyntaxError
    } else if errors().any(|d| d.category == DiagnosticCategory::Timeout) {
        VerificationStatus::Timeout
    } else if errors().next().is_some() || summary.is_some_and(|s| s.1 > 0) {
        VerificationStatus::VerificationFailure
    } else if summary.is_some() || exit_ok {
        VerificationStatus::Success
    } else {
        VerificationStatus::ToolError
    };

    let error_count = errors().count() as u32;
    let (verified, failed) = summary.unwrap_or((0, error_count));
    let mut outcome = VerificationOutcome {
        status,
        obligations_verified: verified,
        obligations_failed: if status == VerificationStatus::Success {
            0
        } else {
            failed.max(error_count)
        },
        diagnostics,
        elapsed_s: 0.0,
        cached: false,
        tool_message: None,
    };
    if status == VerificationStatus::SyntaxError && outcome.diagnostics.is_empty() {
        outcome.diagnostics.push(Diagnostic::error(
            0,
            0,
            "syntax or resolution errors detected",
            DiagnosticCategory::Parse,
        ));
    }
    if status == VerificationStatus::ToolError {
        let tail: Vec<&str> = output.lines().rev().take(5).collect();
        outcome.tool_message = Some(format!(
            "verifier exited abnormally without diagnostics: {}",
            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
        ));
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(out: &str, ok: bool) -> VerificationOutcome {
        parse_output(&PatternTable::default(), out, ok)
    }

    #[test]
    fn success_summary() {
        let o = parse(
            "\nDafny program verifier finished with 3 verified, 0 errors\n",
            true,
        );
        assert_eq!(o.status, VerificationStatus::Success);
        assert_eq!((o.obligations_verified, o.obligations_failed), (3, 0));
    }

    #[test]
    fn postcondition_failure_with_related_location() {
        let out =
            "program.dfy(1,27): Error: a postcondition could not be proved on this return path\n\
program.dfy(1,19): Related location: this is the postcondition that could not be proved\n\n\
Dafny program verifier finished with 0 verified, 1 error\n";
        let o = parse(out, false);
        assert_eq!(o.status, VerificationStatus::VerificationFailure);
        assert_eq!(o.diagnostics.len(), 1);
        assert_eq!((o.diagnostics[0].line, o.diagnostics[0].col), (1, 27));
        assert!(o.diagnostics[0]
            .message
            .contains("related location program.dfy(1,19)"));
        assert_eq!(o.obligations_failed, 1);
    }

    #[test]
    fn parse_and_resolution_errors() {
        let o = parse("program.dfy(1,10): Error: invalid FormalsOptionalIds\n1 parse errors detected in program.dfy\n", false);
        assert_eq!(o.status, VerificationStatus::SyntaxError);
        assert_eq!(o.diagnostics[0].category, DiagnosticCategory::Parse);
        let o = parse("program.dfy(3,2): Error: unresolved identifier: z\n1 resolution/type errors detected in program.dfy\n", false);
        assert_eq!(o.status, VerificationStatus::SyntaxError);
        assert_eq!(o.diagnostics[0].category, DiagnosticCategory::Resolution);
    }

    #[test]
    fn verifier_timeout() {
        let out = "program.dfy(2,7): Error: Verification of 'M' timed out after 10 seconds\n\nDafny program verifier finished with 0 verified, 0 errors, 1 time out\n";
        let o = parse(out, false);
        assert_eq!(o.status, VerificationStatus::Timeout);
    }

    #[test]
    fn crash_is_tool_error() {
        let o = parse(
            "Unhandled exception. System.NullReferenceException\n",
            false,
        );
        assert_eq!(o.status, VerificationStatus::ToolError);
        assert!(o.tool_message.unwrap().contains("NullReference"));
    }
}

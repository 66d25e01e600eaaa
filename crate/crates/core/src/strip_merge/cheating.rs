use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::minimizer::delta::align;
use crate::source::lexer::tokenize;
use crate::source::{collapse_whitespace, parse, ClauseKind, ClauseSite, SourceFile};

use super::strip::strip_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// `assume` statement or `{:axiom}` attribute.
    Assume,
    DecreasesStar,
    RemovedTestAssertion,
    AlteredCode,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Assume => "assume",
            Self::DecreasesStar => "decreases-star",
            Self::RemovedTestAssertion => "removed-test-assertion",
            Self::AlteredCode => "altered-code",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based line in the candidate, or in the original for removals.
    pub line: usize,
    pub text: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Assume => "assumptions are not allowed",
            ViolationKind::DecreasesStar => "termination checking must not be disabled",
            ViolationKind::RemovedTestAssertion => "test assertion was removed or changed",
            ViolationKind::AlteredCode => "program code was removed or changed",
        };
        write!(f, "line {}: {}: {}", self.line, what, self.text)
    }
}

/// Assert text without attributes, proof block or terminator.
fn assert_key(text: &str) -> String {
    let toks: Vec<&str> = tokenize(text)
        .iter()
        .filter(|t| !t.is_comment())
        .map(|t| t.text(text))
        .collect();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        if t == "{" && toks.get(i + 1) == Some(&":") {
            let mut d = 0;
            while i < toks.len() {
                match toks[i] {
                    "{" => d += 1,
                    "}" => {
                        d -= 1;
                        if d == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            i += 1;
            continue;
        }
        if depth == 0 && (t == ";" || (t == "by" && toks.get(i + 1) == Some(&"{"))) {
            break;
        }
        match t {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            _ => {}
        }
        out.push(t);
        i += 1;
    }
    collapse_whitespace(&out.join(" "))
}

/// Guardrail check of a generated program against the unannotated input.
pub fn detect_cheating(stripped_original: &SourceFile, candidate: &SourceFile) -> Vec<Violation> {
    let mut out = Vec::new();

    for d in &candidate.declarations {
        if d.attributes.iter().any(|a| a.contains(":axiom")) {
            out.push(Violation {
                kind: ViolationKind::Assume,
                line: d.span.start_line,
                text: d.attributes.join(" "),
            });
        }
        for c in &d.clauses {
            if c.site == ClauseSite::NegativeTest {
                continue;
            }
            if c.kind == ClauseKind::Assume {
                out.push(Violation {
                    kind: ViolationKind::Assume,
                    line: c.span.start_line,
                    text: collapse_whitespace(&c.text),
                });
            }
            if c.kind == ClauseKind::Decreases && c.text["decreases".len()..].trim() == "*" {
                out.push(Violation {
                    kind: ViolationKind::DecreasesStar,
                    line: c.span.start_line,
                    text: collapse_whitespace(&c.text),
                });
            }
        }
    }

    let mut available: HashMap<String, usize> = HashMap::new();
    for d in candidate.declarations.iter().filter(|d| d.is_test) {
        for c in &d.clauses {
            if c.kind == ClauseKind::Assert && c.site == ClauseSite::Statement {
                *available.entry(assert_key(&c.text)).or_default() += 1;
            }
        }
    }
    let oracles = stripped_original.test_oracle_asserts();
    for c in &oracles {
        let key = assert_key(&c.text);
        match available.get_mut(&key) {
            Some(n) if *n > 0 => *n -= 1,
            _ => out.push(Violation {
                kind: ViolationKind::RemovedTestAssertion,
                line: c.span.start_line,
                text: collapse_whitespace(&c.text),
            }),
        }
    }

    // executable code of the original must align with the candidate's
    let base = strip_text(&stripped_original.text);
    let base_oracles: BTreeSet<usize> = parse(&base)
        .test_oracle_asserts()
        .iter()
        .flat_map(|c| c.span.lines())
        .collect();
    let delta = align(&base, &strip_text(&candidate.text));
    let mut seen_lines = BTreeSet::new();
    for u in delta.unmatched_original() {
        if base_oracles.contains(&u.line) || !seen_lines.insert(u.line) {
            continue;
        }
        let line_text = base
            .lines()
            .nth(u.line - 1)
            .unwrap_or("")
            .trim()
            .to_string();
        out.push(Violation {
            kind: ViolationKind::AlteredCode,
            line: u.line,
            text: line_text,
        });
    }
    out.sort_by_key(|v| (v.line, v.kind as u8));
    out
}

//! Alignment between an original program and an extension of it.
//!
//! Lines are compared as sequences of units. A unit is a run of tokens on
//! one line, cut after top-level `;`, before specification-clause keywords
//! and around block braces. Comments and `{:...}` attributes are ignored and
//! whitespace never matters, so reformatting such as moving a body brace to
//! its own line or splitting an inline clause does not break alignment.
//! Block-opening braces carry no unit; a closing brace is keyed by the
//! statement that opened its block so nested blocks align structurally.

use serde::{Deserialize, Serialize};

use crate::source::lexer::{tokenize, LineIndex, Token, TokenKind};
use crate::source::parse::brace_opens_block;

const CLAUSE_WORDS: &[&str] = &[
    "requires",
    "ensures",
    "invariant",
    "decreases",
    "reads",
    "modifies",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    /// 1-based line.
    pub line: usize,
    pub start: usize,
    pub end: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedRun {
    /// 1-based inclusive line range in the extended text.
    pub start_line: usize,
    pub end_line: usize,
    pub start: usize,
    pub end: usize,
}

impl InsertedRun {
    pub fn line_count(&self) -> usize {
        self.end_line - self.start_line + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaAlignment {
    /// One entry per extended line carrying units: the original line of its
    /// first matched unit, or `None` when the line is entirely inserted.
    pub pairs: Vec<(Option<usize>, usize)>,
    pub inserted_runs: Vec<InsertedRun>,
    pub original_units: Vec<Unit>,
    pub extended_units: Vec<Unit>,
    /// For every extended unit, the index of the original unit it matches.
    pub matches: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeltaError {
    #[error("original line {line} is not contained in the extended program: {text}")]
    OriginalNotContained { line: usize, text: String },
}

/// Splits `text` into comparison units in document order.
pub fn units(text: &str) -> Vec<Unit> {
    let index = LineIndex::new(text);
    let toks: Vec<Token> = tokenize(text)
        .into_iter()
        .filter(|t| !t.is_comment())
        .collect();
    let t = |i: usize| toks[i].text(text);

    // drop attributes
    let mut keep = vec![true; toks.len()];
    let mut i = 0;
    while i < toks.len() {
        if t(i) == "{" && i + 1 < toks.len() && t(i + 1) == ":" && toks[i + 1].start == toks[i].end
        {
            let mut depth = 0i32;
            let mut j = i;
            while j < toks.len() {
                match t(j) {
                    "{" => depth += 1,
                    "}" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            for k in i..=j.min(toks.len() - 1) {
                keep[k] = false;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let toks: Vec<Token> = toks
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(t, _)| t)
        .collect();
    let t = |i: usize| toks[i].text(text);

    let mut out: Vec<Unit> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    // stack of (is_block, opener key)
    let mut braces: Vec<(bool, String)> = Vec::new();
    // the next unit starts a statement; its key names any block it opens
    let mut stmt_start = true;
    let mut cur_opens_stmt = false;
    let mut opener = String::new();
    let mut depth = 0i32;

    let flush =
        |cur: &mut Vec<usize>, out: &mut Vec<Unit>, opens: &mut bool, opener: &mut String| {
            if cur.is_empty() {
                return;
            }
            let key = cur
                .iter()
                .map(|&i| toks[i].text(text))
                .collect::<Vec<_>>()
                .join(" ");
            if std::mem::take(opens) {
                *opener = key.clone();
            }
            out.push(Unit {
                line: index.line_of(toks[cur[0]].start),
                start: toks[cur[0]].start,
                end: toks[*cur.last().unwrap()].end,
                key,
            });
            cur.clear();
        };

    for i in 0..toks.len() {
        let tok = t(i);
        let new_line = i > 0 && index.line_of(toks[i].start) != index.line_of(toks[i - 1].start);
        if new_line {
            flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
            depth = 0;
        }
        match tok {
            "{" => {
                let is_block = match cur.len() {
                    0 => true,
                    1 => brace_opens_block(t(i - 1), None),
                    _ => brace_opens_block(t(i - 1), Some(t(i - 2))),
                };
                if is_block {
                    flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
                    braces.push((true, std::mem::take(&mut opener)));
                    stmt_start = true;
                    depth = 0;
                } else {
                    braces.push((false, String::new()));
                    cur.push(i);
                    depth += 1;
                }
                continue;
            }
            "}" => {
                match braces.pop() {
                    Some((false, _)) => {
                        cur.push(i);
                        depth -= 1;
                    }
                    popped => {
                        flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
                        let key = match popped {
                            Some((_, k)) => format!("}} {k}"),
                            None => "}".to_string(),
                        };
                        out.push(Unit {
                            line: index.line_of(toks[i].start),
                            start: toks[i].start,
                            end: toks[i].end,
                            key,
                        });
                        stmt_start = true;
                        depth = 0;
                    }
                }
                continue;
            }
            _ => {}
        }
        if depth <= 0
            && !cur.is_empty()
            && CLAUSE_WORDS.contains(&tok)
            && toks[i].kind == TokenKind::Ident
        {
            flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
        }
        if cur.is_empty() && stmt_start {
            cur_opens_stmt = true;
            stmt_start = false;
        }
        cur.push(i);
        match tok {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            ";" if depth <= 0 => {
                flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
                stmt_start = true;
            }
            _ => {}
        }
    }
    flush(&mut cur, &mut out, &mut cur_opens_stmt, &mut opener);
    out
}

/// Unit-level longest common subsequence. Among equal-length alignments the
/// one matching each original unit to the earliest possible extended unit is
/// chosen.
fn lcs(a: &[&str], b: &[&str]) -> Vec<Option<usize>> {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * (m + 1)];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i * w + j] = if a[i] == b[j] {
                dp[(i + 1) * w + j + 1] + 1
            } else {
                dp[(i + 1) * w + j].max(dp[i * w + j + 1])
            };
        }
    }
    let mut out = vec![None; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] && dp[i * w + j] == dp[(i + 1) * w + j + 1] + 1 {
            out[j] = Some(i);
            i += 1;
            j += 1;
        } else if dp[i * w + j + 1] == dp[i * w + j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Aligns `extended` against `original` without requiring containment.
pub fn align(original: &str, extended: &str) -> DeltaAlignment {
    let ou = units(original);
    let eu = units(extended);
    let a: Vec<&str> = ou.iter().map(|u| u.key.as_str()).collect();
    let b: Vec<&str> = eu.iter().map(|u| u.key.as_str()).collect();
    let matches = lcs(&a, &b);

    let index = LineIndex::new(extended);
    let line_count = index.line_count();
    // per line: None = no units, Some(true) = all inserted, Some(false) = matched
    let mut state: Vec<Option<bool>> = vec![None; line_count + 2];
    let mut first_match: Vec<Option<usize>> = vec![None; line_count + 2];
    for (u, m) in eu.iter().zip(&matches) {
        let s = &mut state[u.line];
        match m {
            Some(oi) => {
                *s = Some(false);
                if first_match[u.line].is_none() {
                    first_match[u.line] = Some(ou[*oi].line);
                }
            }
            None => {
                if s.is_none() {
                    *s = Some(true);
                }
            }
        }
    }
    let pairs = (1..=line_count)
        .filter(|&l| state[l].is_some())
        .map(|l| (first_match[l], l))
        .collect();

    let mut inserted_runs = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for l in 1..=line_count {
        match state[l] {
            Some(true) => {
                run = Some(run.map_or((l, l), |(s, _)| (s, l)));
            }
            Some(false) => {
                if let Some((s, e)) = run.take() {
                    inserted_runs.push(make_run(&index, extended, s, e));
                }
            }
            None => {}
        }
    }
    if let Some((s, e)) = run {
        inserted_runs.push(make_run(&index, extended, s, e));
    }

    DeltaAlignment {
        pairs,
        inserted_runs,
        original_units: ou,
        extended_units: eu,
        matches,
    }
}

fn make_run(index: &LineIndex, text: &str, s: usize, e: usize) -> InsertedRun {
    InsertedRun {
        start_line: s,
        end_line: e,
        start: index.line_start(s),
        end: index.line_end(text, e),
    }
}

/// Aligns and checks that every original unit occurs in `extended`.
pub fn compute_delta(original: &str, extended: &str) -> Result<DeltaAlignment, DeltaError> {
    let d = align(original, extended);
    if let Some(u) = d.unmatched_original().first() {
        return Err(DeltaError::OriginalNotContained {
            line: u.line,
            text: u.key.clone(),
        });
    }
    Ok(d)
}

impl DeltaAlignment {
    pub fn unmatched_original(&self) -> Vec<&Unit> {
        let mut hit = vec![false; self.original_units.len()];
        for m in self.matches.iter().flatten() {
            hit[*m] = true;
        }
        self.original_units
            .iter()
            .zip(hit)
            .filter(|(_, h)| !h)
            .map(|(u, _)| u)
            .collect()
    }

    /// True when `start..end` of the extended text holds at least one unit
    /// and every unit inside it is inserted. Units straddling the boundary
    /// make the range not fully inserted.
    pub fn is_inserted(&self, start: usize, end: usize) -> bool {
        let mut any = false;
        for (u, m) in self.extended_units.iter().zip(&self.matches) {
            let inside = start <= u.start && u.end <= end;
            let overlaps = u.start < end && start < u.end;
            if inside {
                if m.is_some() {
                    return false;
                }
                any = true;
            } else if overlaps {
                return false;
            }
        }
        any
    }

    /// Extended lines that are entirely inserted.
    pub fn inserted_lines(&self) -> Vec<usize> {
        self.inserted_runs
            .iter()
            .flat_map(|r| r.start_line..=r.end_line)
            .filter(|l| self.pairs.iter().any(|(o, e)| e == l && o.is_none()))
            .collect()
    }
}

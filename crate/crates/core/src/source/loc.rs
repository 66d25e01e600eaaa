//! Annotation-aware line counting.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, LineIndex};
use super::parse::is_helper_comment;
use super::{is_oracle_clause, ClauseSite, SourceFile};

/// Line counts of a program: code (`L`), annotations (`A`) and the subset of
/// annotations that are proof helpers (`H`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocStats {
    #[serde(rename = "L")]
    pub code: usize,
    #[serde(rename = "A")]
    pub annotations: usize,
    #[serde(rename = "H")]
    pub helpers: usize,
}

impl LocStats {
    pub fn total(&self) -> usize {
        self.code + self.annotations
    }
}

impl std::ops::Add for LocStats {
    type Output = LocStats;
    fn add(self, o: LocStats) -> LocStats {
        LocStats {
            code: self.code + o.code,
            annotations: self.annotations + o.annotations,
            helpers: self.helpers + o.helpers,
        }
    }
}

impl std::iter::Sum for LocStats {
    fn sum<I: Iterator<Item = LocStats>>(iter: I) -> LocStats {
        iter.fold(LocStats::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineClass {
    Blank,
    Comment,
    Code,
    Annotation { helper: bool },
}

/// Byte ranges of annotation material, flagged when they are proof helpers.
pub(crate) fn annotation_ranges(file: &SourceFile) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    for d in &file.declarations {
        if d.is_annotation() {
            out.push((d.span.start, d.span.end, d.is_proof_helper()));
            continue;
        }
        for c in &d.clauses {
            let helper = match c.site {
                ClauseSite::DeclHeader | ClauseSite::LoopHeader | ClauseSite::Misplaced => {
                    if !c.kind.is_specification() {
                        continue;
                    }
                    false
                }
                ClauseSite::Statement => {
                    if d.is_test && is_oracle_clause(c) {
                        continue;
                    }
                    use super::ClauseKind::*;
                    match c.kind {
                        Assert | Assume | Calc | GhostVar => true,
                        _ => continue,
                    }
                }
                ClauseSite::NegativeTest => continue,
            };
            out.push((c.span.start, c.span.end, helper));
        }
        for s in d.statements() {
            if s.proof_helper {
                out.push((s.span.start, s.span.end, true));
            }
        }
    }
    out
}

pub(crate) fn classify_lines(file: &SourceFile) -> Vec<LineClass> {
    let text = &file.text;
    let index = LineIndex::new(text);
    let n = index.line_count();
    let mut has_code = vec![false; n + 1];
    let mut has_comment = vec![false; n + 1];
    let mut all_annot = vec![true; n + 1];
    let mut any_helper = vec![false; n + 1];
    let mut tagged = vec![false; n + 1];

    let ranges = annotation_ranges(file);
    for tok in tokenize(text) {
        let first = index.line_of(tok.start);
        let last = index.line_of(tok.end.saturating_sub(1).max(tok.start));
        if tok.is_comment() {
            for l in first..=last.min(n) {
                has_comment[l] = true;
            }
            let t = tok.text(text);
            if t.starts_with("//") && !t.contains("//@invalid") && is_helper_comment(t) {
                tagged[first] = true;
            }
            continue;
        }
        let covering = ranges
            .iter()
            .filter(|(s, e, _)| *s <= tok.start && tok.end <= *e)
            .collect::<Vec<_>>();
        for l in first..=last.min(n) {
            has_code[l] = true;
            if covering.is_empty() {
                all_annot[l] = false;
            }
            if covering.iter().any(|r| r.2) {
                any_helper[l] = true;
            }
        }
    }

    (1..=n)
        .map(|l| {
            if has_code[l] && tagged[l] {
                LineClass::Annotation { helper: true }
            } else if has_code[l] && all_annot[l] {
                LineClass::Annotation {
                    helper: any_helper[l],
                }
            } else if has_code[l] {
                LineClass::Code
            } else if has_comment[l] {
                LineClass::Comment
            } else {
                LineClass::Blank
            }
        })
        .collect()
}

fn tally(classes: impl Iterator<Item = LineClass>) -> LocStats {
    let mut s = LocStats::default();
    for c in classes {
        match c {
            LineClass::Code => s.code += 1,
            LineClass::Annotation { helper } => {
                s.annotations += 1;
                if helper {
                    s.helpers += 1;
                }
            }
            _ => {}
        }
    }
    s
}

/// Counts code, annotation and proof-helper lines.
pub fn count_loc(file: &SourceFile) -> LocStats {
    tally(classify_lines(file).into_iter())
}

/// Per-declaration breakdown plus the lines outside any declaration. Each
/// line is attributed to the declaration in which it starts.
pub fn count_loc_by_declaration(file: &SourceFile) -> (Vec<(String, LocStats)>, LocStats) {
    let classes = classify_lines(file);
    let index = LineIndex::new(&file.text);
    let mut owner: Vec<Option<usize>> = vec![None; classes.len()];
    for (i, d) in file.declarations.iter().enumerate() {
        for l in d.span.start_line..=d.span.end_line {
            if l - 1 < owner.len() && owner[l - 1].is_none() {
                // lines shared with a previous declaration stay with it
                let line_start = index.line_start(l);
                if l == d.span.start_line || line_start >= d.span.start {
                    owner[l - 1] = Some(i);
                }
            }
        }
    }
    let per_decl = file
        .declarations
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let stats = tally(
                classes
                    .iter()
                    .zip(&owner)
                    .filter(|(_, o)| **o == Some(i))
                    .map(|(c, _)| *c),
            );
            (d.name.clone(), stats)
        })
        .collect();
    let free = tally(
        classes
            .iter()
            .zip(&owner)
            .filter(|(_, o)| o.is_none())
            .map(|(c, _)| *c),
    );
    (per_decl, free)
}

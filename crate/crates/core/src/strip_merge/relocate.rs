use crate::source::lexer::LineIndex;
use crate::source::{parse, ClauseKind, SourceFile, Stmt, StmtKind};

use super::edit::{apply, insert_before_brace, Edit};

fn is_loop_clause(file: &SourceFile, s: &Stmt) -> bool {
    s.kind == StmtKind::MisplacedClause
        && matches!(
            clause_kind(file, s),
            Some(ClauseKind::Invariant | ClauseKind::Decreases | ClauseKind::Modifies)
        )
}

fn clause_kind(file: &SourceFile, s: &Stmt) -> Option<ClauseKind> {
    let word = s.span.text(&file.text).split_whitespace().next()?;
    ClauseKind::from_keyword(word)
}

/// Deletion of a statement: whole lines when it owns them, otherwise the
/// span and the whitespace before it.
fn delete_stmt(text: &str, index: &LineIndex, s: &Stmt) -> Edit {
    let ls = index.line_start(s.span.start_line);
    let le = index.line_end(text, s.span.end_line);
    let owns_lines =
        text[ls..s.span.start].trim().is_empty() && text[s.span.end..le].trim().is_empty();
    if owns_lines {
        let next = if s.span.end_line < index.line_count() {
            index.line_start(s.span.end_line + 1)
        } else {
            text.len()
        };
        Edit {
            start: ls,
            end: next,
            text: String::new(),
        }
    } else {
        let start = ls + text[ls..s.span.start].trim_end().len();
        Edit {
            start,
            end: s.span.end,
            text: String::new(),
        }
    }
}

fn relocations(file: &SourceFile, siblings: &[Stmt], index: &LineIndex, edits: &mut Vec<Edit>) {
    for (i, s) in siblings.iter().enumerate() {
        if matches!(s.kind, StmtKind::While | StmtKind::For) {
            if let Some(open) = s.body_open {
                let mut moved: Vec<&Stmt> = s
                    .children
                    .iter()
                    .filter(|c| is_loop_clause(file, c))
                    .collect();
                moved.extend(
                    siblings[i + 1..]
                        .iter()
                        .take_while(|c| is_loop_clause(file, c)),
                );
                if !moved.is_empty() {
                    let texts: Vec<String> = moved
                        .iter()
                        .map(|c| c.span.text(&file.text).to_string())
                        .collect();
                    edits.push(insert_before_brace(&file.text, open, &texts));
                    for c in moved {
                        edits.push(delete_stmt(&file.text, index, c));
                    }
                }
            }
        }
        relocations(file, &s.children, index, edits);
    }
}

/// Moves loop clauses written inside a loop body, or directly after it, to
/// the loop header just before the body brace. Relative order is kept.
pub fn relocate_invariants(text: &str) -> String {
    let file = parse(text);
    let index = LineIndex::new(text);
    let mut edits = Vec::new();
    for d in &file.declarations {
        relocations(&file, &d.body, &index, &mut edits);
    }
    if edits.is_empty() {
        return text.to_string();
    }
    apply(text, edits)
}

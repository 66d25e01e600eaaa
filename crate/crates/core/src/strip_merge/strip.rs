use crate::source::lexer::{tokenize, LineIndex, TokenKind};
use crate::source::parse::{is_helper_comment, NEGATIVE_MARKER};
use crate::source::{is_oracle_clause, parse, ClauseKind, ClauseSite, SourceFile};

use super::edit::remove_ranges;

/// Byte ranges holding annotations that a conventional program does not
/// carry. Test-oracle asserts, `modifies` frames and `expect` statements are
/// never included.
fn annotation_removals(file: &SourceFile) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for d in &file.declarations {
        if d.is_annotation() {
            out.push((d.span.start, d.span.end));
            continue;
        }
        for c in &d.clauses {
            let remove = match c.site {
                ClauseSite::DeclHeader | ClauseSite::LoopHeader | ClauseSite::Misplaced => {
                    c.kind.is_specification()
                }
                ClauseSite::Statement => match c.kind {
                    ClauseKind::Assert => !(d.is_test && is_oracle_clause(c)),
                    ClauseKind::Assume | ClauseKind::Calc | ClauseKind::GhostVar => true,
                    _ => false,
                },
                ClauseSite::NegativeTest => false,
            };
            if remove {
                out.push((c.span.start, c.span.end));
            }
        }
        for s in d.statements() {
            if s.proof_helper {
                out.push((s.span.start, s.span.end));
            }
        }
    }
    out.extend(tagged_line_removals(file));
    out
}

/// Lines carrying code and a `// helper` tag, widened to the innermost
/// statement covering the line so multi-line helpers go as a whole.
fn tagged_line_removals(file: &SourceFile) -> Vec<(usize, usize)> {
    let text = &file.text;
    let index = LineIndex::new(text);
    let toks = tokenize(text);
    let mut out = Vec::new();
    for t in toks.iter().filter(|t| t.kind == TokenKind::LineComment) {
        let ct = t.text(text);
        if ct.contains(NEGATIVE_MARKER) || !is_helper_comment(ct) {
            continue;
        }
        let line = index.line_of(t.start);
        let ls = index.line_start(line);
        let le = index.line_end(text, line);
        let Some(first) = toks
            .iter()
            .find(|k| !k.is_comment() && k.start >= ls && k.start < le)
        else {
            continue;
        };
        let mut range = (ls, le);
        let stmt = file
            .declarations
            .iter()
            .flat_map(|d| d.statements())
            .filter(|s| s.span.start <= first.start && first.start < s.span.end)
            .min_by_key(|s| s.span.end - s.span.start);
        if let Some(s) = stmt {
            range = (range.0.min(s.span.start), range.1.max(s.span.end));
        }
        out.push(range);
    }
    out
}

/// Removes every specification clause, ghost and lemma declaration, proof
/// statement and `// helper` line. Test-oracle asserts, `//@invalid` lines
/// and other comments are kept verbatim.
pub fn strip_annotations(file: &SourceFile) -> String {
    remove_ranges(&file.text, &annotation_removals(file))
}

/// [`strip_annotations`] over raw text.
pub fn strip_text(text: &str) -> String {
    strip_annotations(&parse(text))
}

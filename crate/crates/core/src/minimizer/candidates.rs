//! Removal candidates: inserted segments that can be deleted on their own.

use serde::{Deserialize, Serialize};

use super::delta::DeltaAlignment;
use crate::source::lexer::{tokenize, LineIndex};
use crate::source::{ClauseSite, SourceFile, Span, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "a-statement")]
    Statement,
    #[serde(rename = "b-block-part")]
    BlockPart,
    #[serde(rename = "c-statement-group")]
    StatementGroup,
    #[serde(rename = "d-loop-spec-clause")]
    LoopSpecClause,
    #[serde(rename = "e-decl-spec-clause")]
    DeclSpecClause,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Statement => "a-statement",
            Category::BlockPart => "b-block-part",
            Category::StatementGroup => "c-statement-group",
            Category::LoopSpecClause => "d-loop-spec-clause",
            Category::DeclSpecClause => "e-decl-spec-clause",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSegment {
    pub category: Category,
    /// Region deleted, or replaced by `replacement`.
    pub span: Span,
    pub owner_decl: String,
    pub depth: usize,
    pub replacement: Option<String>,
    /// Part of the owner's header rather than its body.
    pub in_header: bool,
    pub text: String,
}

/// Code-token ranges per 1-based line.
struct LineTokens {
    per_line: Vec<Vec<(usize, usize)>>,
    index: LineIndex,
}

impl LineTokens {
    fn new(text: &str) -> Self {
        let index = LineIndex::new(text);
        let mut per_line = vec![Vec::new(); index.line_count() + 2];
        for t in tokenize(text) {
            if !t.is_comment() {
                let l = index.line_of(t.start);
                if l < per_line.len() {
                    per_line[l].push((t.start, t.end));
                }
            }
        }
        Self { per_line, index }
    }

    /// Some line would be left without code if `start..end` were removed.
    fn frees_line(&self, start: usize, end: usize) -> bool {
        let first = self.index.line_of(start);
        let last = self.index.line_of(end.saturating_sub(1).max(start));
        (first..=last.min(self.per_line.len() - 1)).any(|l| {
            let toks = &self.per_line[l];
            !toks.is_empty() && toks.iter().all(|&(s, e)| start <= s && e <= end)
        })
    }

    /// No code between the two offsets.
    fn only_trivia_between(&self, a: usize, b: usize) -> bool {
        let first = self.index.line_of(a);
        let last = self.index.line_of(b.max(a));
        (first..=last.min(self.per_line.len() - 1))
            .flat_map(|l| self.per_line[l].iter())
            .all(|&(s, _)| s < a || s >= b)
    }

    fn span(&self, src: &str, start: usize, end: usize) -> Span {
        let (start_line, start_col) = self.index.position(src, start);
        let (end_line, end_col) = self.index.position(src, end.saturating_sub(1).max(start));
        Span {
            start,
            end,
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }
}

struct Extractor<'a> {
    src: &'a str,
    delta: &'a DeltaAlignment,
    lines: LineTokens,
    out: Vec<CandidateSegment>,
}

impl Extractor<'_> {
    fn push(&mut self, category: Category, span: Span, owner: &str, depth: usize, in_header: bool) {
        self.push_with(category, span, owner, depth, in_header, None);
    }

    fn push_with(
        &mut self,
        category: Category,
        span: Span,
        owner: &str,
        depth: usize,
        in_header: bool,
        replacement: Option<String>,
    ) {
        self.out.push(CandidateSegment {
            category,
            text: self.src[span.start..span.end].to_string(),
            span,
            owner_decl: owner.to_string(),
            depth,
            replacement,
            in_header,
        });
    }

    fn removable(&self, start: usize, end: usize) -> bool {
        self.delta.is_inserted(start, end) && self.lines.frees_line(start, end)
    }

    fn statements(&mut self, stmts: &[Stmt], owner: &str, depth: usize) {
        let mut run: Vec<&Stmt> = Vec::new();
        for s in stmts {
            if s.kind == StmtKind::MisplacedClause {
                self.flush_group(&mut run, owner, depth);
                continue;
            }
            let inserted = self.removable(s.span.start, s.span.end);
            if inserted {
                self.push(Category::Statement, s.span, owner, depth, false);
            }
            if inserted && s.is_single_line() {
                if run
                    .last()
                    .is_some_and(|p| !self.lines.only_trivia_between(p.span.end, s.span.start))
                {
                    self.flush_group(&mut run, owner, depth);
                }
                run.push(s);
            } else {
                self.flush_group(&mut run, owner, depth);
            }
            if let Some(by) = s.by_span {
                if self.delta.is_inserted(s.span.start, s.span.end) {
                    // `assert P by {...}` becomes `assert P;`
                    let head = self.src[..by.start].trim_end().len();
                    if self.lines.frees_line(head, by.end) {
                        let span = self.lines.span(self.src, head, by.end);
                        self.push_with(
                            Category::BlockPart,
                            span,
                            owner,
                            depth + 1,
                            false,
                            Some(";".into()),
                        );
                    }
                }
            }
            if let Some(e) = s.else_span {
                if self.removable(e.start, e.end) {
                    self.push(Category::BlockPart, e, owner, depth + 1, false);
                }
            }
            self.statements(&s.children, owner, depth + 1);
        }
        self.flush_group(&mut run, owner, depth);
    }

    fn flush_group(&mut self, run: &mut Vec<&Stmt>, owner: &str, depth: usize) {
        if run.len() >= 2 {
            let (a, b) = (run[0].span, run[run.len() - 1].span);
            let span = Span {
                start: a.start,
                end: b.end,
                start_line: a.start_line,
                start_col: a.start_col,
                end_line: b.end_line,
                end_col: b.end_col,
            };
            self.push(Category::StatementGroup, span, owner, depth, false);
        }
        run.clear();
    }
}

/// Candidates in document order, outer segments before the segments they
/// contain. Only segments made entirely of inserted units whose deletion
/// frees at least one line qualify.
pub fn extract_candidates(delta: &DeltaAlignment, file: &SourceFile) -> Vec<CandidateSegment> {
    let mut ex = Extractor {
        src: &file.text,
        delta,
        lines: LineTokens::new(&file.text),
        out: Vec::new(),
    };
    for d in &file.declarations {
        for c in &d.clauses {
            let (category, in_header) = match c.site {
                ClauseSite::DeclHeader => (Category::DeclSpecClause, true),
                ClauseSite::LoopHeader => (Category::LoopSpecClause, false),
                _ => continue,
            };
            if ex.removable(c.span.start, c.span.end) {
                ex.push(
                    category,
                    c.span,
                    &d.name,
                    usize::from(!in_header),
                    in_header,
                );
            }
        }
        if d.has_statements() {
            ex.statements(&d.body, &d.name, 1);
        }
    }
    let mut out = ex.out;
    out.sort_by(|a, b| {
        a.span
            .start
            .cmp(&b.span.start)
            .then(b.span.end.cmp(&a.span.end))
            .then(a.category.cmp(&b.category).reverse())
    });
    out
}

/// Bottom-to-top, outer before inner.
pub fn traversal_order(cands: &mut [CandidateSegment]) {
    cands.sort_by(|a, b| {
        b.span
            .end
            .cmp(&a.span.end)
            .then(a.span.start.cmp(&b.span.start))
            .then(a.category.cmp(&b.category).reverse())
    });
}

//! Structured view of a Dafny program.
//!
//! Segmentation is line-and-bracket based rather than a full grammar: it
//! recovers declarations, specification clauses and statements well enough
//! for stripping, delta computation and minimization. The verifier remains
//! the ground-truth parser.

pub mod lexer;
mod loc;
pub(crate) mod parse;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub use loc::{count_loc, count_loc_by_declaration, LocStats};
pub use parse::parse;

/// Source region. Byte offsets are half-open; line/column pairs are 1-based
/// and point at the first and last character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl Span {
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<usize> {
        self.start_line..=self.end_line
    }

    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclKind {
    Method,
    Lemma,
    Function,
    Predicate,
    GhostFunction,
    GhostPredicate,
    Datatype,
    Const,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseKind {
    Requires,
    Ensures,
    Invariant,
    Decreases,
    Modifies,
    Reads,
    Assert,
    Assume,
    Expect,
    Calc,
    GhostVar,
    /// A commented-out negative test that is not an assertion (e.g. a call
    /// expected to violate a precondition).
    Statement,
}

impl ClauseKind {
    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "requires" => Self::Requires,
            "ensures" => Self::Ensures,
            "invariant" => Self::Invariant,
            "decreases" => Self::Decreases,
            "modifies" => Self::Modifies,
            "reads" => Self::Reads,
            "assert" => Self::Assert,
            "assume" => Self::Assume,
            "expect" => Self::Expect,
            "calc" => Self::Calc,
            _ => return None,
        })
    }

    /// Specification clauses removed when producing a conventional program.
    /// `modifies` is part of the executable program's frame and is kept.
    pub fn is_specification(self) -> bool {
        matches!(
            self,
            Self::Requires | Self::Ensures | Self::Invariant | Self::Decreases | Self::Reads
        )
    }
}

/// Where a clause was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseSite {
    DeclHeader,
    LoopHeader,
    Statement,
    /// A loop clause written inside or after the loop body.
    Misplaced,
    NegativeTest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub kind: ClauseKind,
    pub site: ClauseSite,
    pub span: Span,
    /// Declaration name, or loop id (`Decl#loopN`) for loop clauses.
    pub owner: String,
    pub is_negative_test: bool,
    pub is_tagged_helper: bool,
    /// Nested inside a proof construct (by-block, calc, helper forall).
    pub in_proof_block: bool,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StmtKind {
    Assert,
    Assume,
    Expect,
    Calc,
    GhostVar,
    If,
    While,
    For,
    Forall,
    Match,
    Block,
    /// `invariant`/`decreases`/... appearing where a statement is expected.
    MisplacedClause,
    Simple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub children: Vec<Stmt>,
    pub loop_id: Option<String>,
    /// From the `else` keyword to the end of the else branch.
    pub else_span: Option<Span>,
    /// From the `by` keyword to the end of an assert's proof block.
    pub by_span: Option<Span>,
    /// Byte offset of the opening brace of a loop body.
    pub body_open: Option<usize>,
    /// Lemma call, `reveal`, or `forall ... ensures` proof statement.
    pub proof_helper: bool,
}

impl Stmt {
    pub fn is_single_line(&self) -> bool {
        self.span.start_line == self.span.end_line
    }

    /// Pre-order traversal including `self`.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    pub is_ghost: bool,
    pub attributes: Vec<String>,
    pub span: Span,
    pub header_span: Span,
    pub body_span: Option<Span>,
    pub clauses: Vec<Clause>,
    pub is_test: bool,
    pub body: Vec<Stmt>,
    /// Enclosing module/class, if any.
    pub container: Option<String>,
}

impl Declaration {
    /// Specification-only declarations: lemmas and ghost functions/predicates/methods.
    pub fn is_annotation(&self) -> bool {
        self.is_ghost
            || matches!(
                self.kind,
                DeclKind::Lemma | DeclKind::GhostFunction | DeclKind::GhostPredicate
            )
    }

    /// Declarations that count as proof helpers (lemmas and ghost methods).
    pub fn is_proof_helper(&self) -> bool {
        self.kind == DeclKind::Lemma || (self.kind == DeclKind::Method && self.is_ghost)
    }

    pub fn has_statements(&self) -> bool {
        matches!(self.kind, DeclKind::Method | DeclKind::Lemma)
    }

    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for s in &self.body {
            s.walk(&mut out);
        }
        out
    }

    pub fn header_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses
            .iter()
            .filter(|c| c.site == ClauseSite::DeclHeader)
    }

    pub fn loop_clauses<'a>(&'a self, loop_id: &'a str) -> impl Iterator<Item = &'a Clause> {
        self.clauses
            .iter()
            .filter(move |c| c.site == ClauseSite::LoopHeader && c.owner == loop_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub lines: Vec<String>,
    pub declarations: Vec<Declaration>,
    pub free_comments: Vec<Span>,
    pub warnings: Vec<String>,
}

/// A contiguous piece of the file: a declaration or the text between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Declaration(usize),
    Free,
}

impl SourceFile {
    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = path.into();
        self
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn declaration_names(&self) -> BTreeSet<&str> {
        self.declarations.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn lemma_names(&self) -> BTreeSet<&str> {
        self.declarations
            .iter()
            .filter(|d| d.kind == DeclKind::Lemma)
            .map(|d| d.name.as_str())
            .collect()
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.declarations.iter().flat_map(|d| d.clauses.iter())
    }

    /// Declaration whose span contains `offset`.
    pub fn declaration_at(&self, offset: usize) -> Option<&Declaration> {
        self.declarations
            .iter()
            .find(|d| d.span.contains_offset(offset))
    }

    /// Partition of the text into declarations and free regions, in order.
    pub fn segments(&self) -> Vec<(Segment, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut pos = 0;
        let mut order: Vec<usize> = (0..self.declarations.len()).collect();
        order.sort_by_key(|&i| self.declarations[i].span.start);
        for i in order {
            let span = self.declarations[i].span;
            if span.start < pos {
                continue;
            }
            if span.start > pos {
                out.push((Segment::Free, pos..span.start));
            }
            out.push((Segment::Declaration(i), span.start..span.end));
            pos = span.end;
        }
        if pos < self.text.len() {
            out.push((Segment::Free, pos..self.text.len()));
        }
        out
    }

    /// Re-emits the file from its segmentation.
    pub fn reconstruct(&self) -> String {
        self.segments()
            .into_iter()
            .map(|(_, r)| &self.text[r])
            .collect()
    }

    /// Assert clauses inside test methods that act as test oracles: not
    /// tagged `// helper` and not nested inside a proof construct.
    pub fn test_oracle_asserts(&self) -> Vec<&Clause> {
        self.declarations
            .iter()
            .filter(|d| d.is_test)
            .flat_map(|d| d.clauses.iter())
            .filter(|c| is_oracle_clause(c))
            .collect()
    }

    pub fn negative_tests(&self) -> Vec<&Clause> {
        let mut v: Vec<&Clause> = self.clauses().filter(|c| c.is_negative_test).collect();
        v.sort_by_key(|c| c.span.start);
        v
    }
}

pub(crate) fn is_oracle_clause(c: &Clause) -> bool {
    c.kind == ClauseKind::Assert
        && c.site == ClauseSite::Statement
        && !c.is_tagged_helper
        && !c.in_proof_block
        && !c.is_negative_test
}

/// Convenience wrapper over [`SourceFile::test_oracle_asserts`].
pub fn test_oracle_asserts(file: &SourceFile) -> Vec<Clause> {
    file.test_oracle_asserts().into_iter().cloned().collect()
}

/// Collapses whitespace runs to single spaces and trims.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

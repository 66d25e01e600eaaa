use std::collections::{BTreeSet, HashMap};

use super::lexer::{tokenize, LineIndex, Token, TokenKind};
use super::{
    Clause, ClauseKind, ClauseSite, DeclKind, Declaration, SourceFile, Span, Stmt, StmtKind,
};

pub(crate) const NEGATIVE_MARKER: &str = "//@invalid";

const DECL_KEYWORDS: &[&str] = &[
    "method",
    "lemma",
    "function",
    "predicate",
    "constructor",
    "datatype",
    "codatatype",
    "const",
    "type",
    "newtype",
    "iterator",
    "import",
    "include",
    "export",
    "module",
    "class",
    "trait",
];

const MODIFIERS: &[&str] = &[
    "ghost",
    "static",
    "opaque",
    "twostate",
    "abstract",
    "least",
    "greatest",
    "inductive",
    "colemma",
    "copredicate",
    "replaceable",
];

const CONTAINERS: &[&str] = &["module", "class", "trait"];

const HEADER_CLAUSES: &[&str] = &["requires", "ensures", "decreases", "reads", "modifies"];
const LOOP_CLAUSES: &[&str] = &["invariant", "decreases", "modifies"];
const MISPLACED: &[&str] = &[
    "invariant",
    "decreases",
    "modifies",
    "requires",
    "ensures",
    "reads",
];

/// Tokens after which a `{` opens a set display or comprehension rather
/// than a block.
const EXPR_BEFORE_BRACE: &[&str] = &[
    "in",
    "!in",
    "reads",
    "modifies",
    "decreases",
    "requires",
    "ensures",
    "invariant",
    ":=",
    "=",
    "(",
    ",",
    "[",
    "|",
    ":",
    "==",
    "!=",
    "<",
    "<=",
    ">",
    ">=",
    "+",
    "-",
    "*",
    "&&",
    "||",
    "==>",
    "<==>",
    "<==",
    "!",
    "then",
    "return",
    "::",
    "=>",
    "!!",
];

/// Whether a `{` preceded by `prev` (and `prev2` before it) opens a block.
pub(crate) fn brace_opens_block(prev: &str, prev2: Option<&str>) -> bool {
    // `decreases *` ends a clause
    if prev == "*" && prev2 == Some("decreases") {
        return true;
    }
    !EXPR_BEFORE_BRACE.contains(&prev)
}

/// Tolerant segmentation of Dafny source text. Never fails.
pub fn parse(text: &str) -> SourceFile {
    let all = tokenize(text);
    let index = LineIndex::new(text);
    let toks: Vec<Token> = all.iter().copied().filter(|t| !t.is_comment()).collect();
    let comments: Vec<Token> = all.iter().copied().filter(|t| t.is_comment()).collect();

    let mut comments_by_line: HashMap<usize, Vec<Token>> = HashMap::new();
    for c in &comments {
        let first = index.line_of(c.start);
        let last = index.line_of(c.end.saturating_sub(1).max(c.start));
        for l in first..=last {
            comments_by_line.entry(l).or_default().push(*c);
        }
    }

    let mut p = Parser {
        src: text,
        toks,
        index,
        comments_by_line,
        warnings: Vec::new(),
        loop_counter: 0,
        current_decl: String::new(),
    };
    let n = p.toks.len();
    let mut decls = p.parse_container(0, n, None);

    let lemmas: BTreeSet<String> = decls
        .iter()
        .filter(|d| d.kind == DeclKind::Lemma)
        .map(|d| d.name.clone())
        .collect();
    for d in &mut decls {
        p.finish_declaration(d, &lemmas, &comments);
    }

    let free_comments = comments
        .iter()
        .filter(|c| !decls.iter().any(|d| d.span.contains_offset(c.start)))
        .map(|c| p.span(c.start, c.end))
        .collect();

    SourceFile {
        path: String::new(),
        text: text.to_string(),
        lines: text.lines().map(str::to_string).collect(),
        declarations: decls,
        free_comments,
        warnings: p.warnings,
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    index: LineIndex,
    comments_by_line: HashMap<usize, Vec<Token>>,
    warnings: Vec<String>,
    loop_counter: usize,
    current_decl: String,
}

impl<'a> Parser<'a> {
    fn t(&self, i: usize) -> &'a str {
        match self.toks.get(i) {
            Some(t) => t.text(self.src),
            None => "",
        }
    }

    fn is(&self, i: usize, s: &str) -> bool {
        i < self.toks.len() && self.t(i) == s
    }

    fn line(&self, i: usize) -> usize {
        self.index.line_of(self.toks[i].start)
    }

    fn span(&self, start: usize, end: usize) -> Span {
        let end = end.max(start);
        let (start_line, start_col) = self.index.position(self.src, start);
        let last = if end > start { end - 1 } else { start };
        let (end_line, end_col) = self.index.position(self.src, last);
        Span {
            start,
            end,
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    fn tok_span(&self, first: usize, last: usize) -> Span {
        self.span(self.toks[first].start, self.toks[last].end)
    }

    fn is_attribute_open(&self, i: usize) -> bool {
        self.is(i, "{")
            && i + 1 < self.toks.len()
            && self.t(i + 1) == ":"
            && self.toks[i + 1].start == self.toks[i].end
    }

    /// Index of the `}` matching the `{` at `open`, searching below `limit`.
    fn matching_brace(&self, open: usize, limit: usize) -> Option<usize> {
        let mut depth = 0usize;
        for i in open..limit.min(self.toks.len()) {
            match self.t(i) {
                "{" => depth += 1,
                "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Skips a balanced `{...}` starting at `open`; returns the index after it.
    fn skip_braced(&self, open: usize, limit: usize) -> usize {
        self.matching_brace(open, limit).map_or(limit, |c| c + 1)
    }

    fn is_block_open(&self, i: usize, lo: usize) -> bool {
        if !self.is(i, "{") || self.is_attribute_open(i) {
            return false;
        }
        if i == lo {
            return true;
        }
        let prev2 = if i >= lo + 2 {
            Some(self.t(i - 2))
        } else {
            None
        };
        brace_opens_block(self.t(i - 1), prev2)
    }

    fn starts_decl(&self, i: usize) -> bool {
        let mut j = i;
        while j < self.toks.len() && MODIFIERS.contains(&self.t(j)) {
            j += 1;
        }
        j < self.toks.len()
            && DECL_KEYWORDS.contains(&self.t(j))
            && self.toks[j].kind == TokenKind::Ident
    }

    // ----- declarations -------------------------------------------------

    fn parse_container(
        &mut self,
        lo: usize,
        hi: usize,
        container: Option<String>,
    ) -> Vec<Declaration> {
        let mut out = Vec::new();
        let mut pos = lo;
        while pos < hi {
            if self.t(pos) == "}" {
                // stray closing brace at container level
                pos += 1;
                continue;
            }
            if !self.starts_decl(pos) {
                let start = pos;
                let mut depth = 0i32;
                while pos < hi && !(depth == 0 && pos > start && self.starts_decl(pos)) {
                    match self.t(pos) {
                        "{" => depth += 1,
                        "}" => depth -= 1,
                        _ => {}
                    }
                    pos += 1;
                }
                let span = self.tok_span(start, pos - 1);
                out.push(self.other_decl(span, container.clone()));
                continue;
            }
            let start = pos;
            let mut mods = Vec::new();
            while MODIFIERS.contains(&self.t(pos)) {
                mods.push(self.t(pos));
                pos += 1;
            }
            let kw = self.t(pos);
            if CONTAINERS.contains(&kw) {
                let name = self.name_after(pos + 1, hi).unwrap_or_default();
                let mut j = pos + 1;
                while j < hi && !(self.is(j, "{") && !self.is_attribute_open(j)) {
                    if self.is_attribute_open(j) {
                        j = self.skip_braced(j, hi);
                    } else {
                        j += 1;
                    }
                }
                if j >= hi {
                    // `module M` without a body, or an import-like form
                    let span = self.tok_span(start, hi - 1);
                    out.push(self.other_decl(span, container.clone()));
                    pos = hi;
                    continue;
                }
                let close = match self.matching_brace(j, hi) {
                    Some(c) => c,
                    None => {
                        self.warnings.push(format!(
                            "unbalanced braces in {kw} {name} starting at line {}",
                            self.line(start)
                        ));
                        hi
                    }
                };
                let inner = self.parse_container(j + 1, close.min(hi), Some(name));
                out.extend(inner);
                pos = (close + 1).min(hi.max(close + 1));
                continue;
            }
            let decl = match kw {
                "method" | "lemma" | "function" | "predicate" | "constructor" | "iterator" => {
                    self.parse_callable(start, pos, &mods, hi, container.clone())
                }
                _ => self.parse_simple_decl(start, pos, hi, container.clone()),
            };
            pos = decl.1;
            out.push(decl.0);
        }
        out
    }

    fn other_decl(&self, span: Span, container: Option<String>) -> Declaration {
        Declaration {
            kind: DeclKind::Other,
            name: String::new(),
            is_ghost: false,
            attributes: Vec::new(),
            span,
            header_span: span,
            body_span: None,
            clauses: Vec::new(),
            is_test: false,
            body: Vec::new(),
            container,
        }
    }

    fn name_after(&self, mut i: usize, hi: usize) -> Option<String> {
        while i < hi && self.is_attribute_open(i) {
            i = self.skip_braced(i, hi);
        }
        (i < hi && self.toks[i].kind == TokenKind::Ident).then(|| self.t(i).to_string())
    }

    fn collect_attributes(&self, lo: usize, hi: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = lo;
        while i < hi {
            if self.is_attribute_open(i) {
                let end = self.skip_braced(i, hi);
                out.push(self.src[self.toks[i].start..self.toks[end - 1].end].to_string());
                i = end;
            } else {
                i += 1;
            }
        }
        out
    }

    fn parse_simple_decl(
        &mut self,
        start: usize,
        kw_pos: usize,
        hi: usize,
        container: Option<String>,
    ) -> (Declaration, usize) {
        let kw = self.t(kw_pos);
        let kind = match kw {
            "datatype" | "codatatype" => DeclKind::Datatype,
            "const" => DeclKind::Const,
            _ => DeclKind::Other,
        };
        let name = match kw {
            "include" => self.t(kw_pos + 1).trim_matches('"').to_string(),
            _ => self.name_after(kw_pos + 1, hi).unwrap_or_default(),
        };
        let mut pos = kw_pos + 1;
        let mut depth = 0i32;
        while pos < hi {
            match self.t(pos) {
                "{" => depth += 1,
                "}" => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            if depth == 0 && self.starts_decl(pos) && pos > kw_pos + 1 {
                break;
            }
            pos += 1;
        }
        let end = pos.max(kw_pos + 1);
        let span = self.tok_span(start, end - 1);
        let is_ghost = (start..kw_pos).any(|i| self.t(i) == "ghost");
        let decl = Declaration {
            kind,
            name,
            is_ghost,
            attributes: self.collect_attributes(kw_pos, end),
            span,
            header_span: span,
            body_span: None,
            clauses: Vec::new(),
            is_test: false,
            body: Vec::new(),
            container,
        };
        (decl, end)
    }

    fn parse_callable(
        &mut self,
        start: usize,
        kw_pos: usize,
        mods: &[&str],
        hi: usize,
        container: Option<String>,
    ) -> (Declaration, usize) {
        let kw = self.t(kw_pos);
        let mut after_kw = kw_pos + 1;
        // legacy `function method` / `predicate method`
        let legacy_compiled = matches!(kw, "function" | "predicate") && self.is(after_kw, "method");
        if legacy_compiled {
            after_kw += 1;
        }
        let is_ghost = mods.contains(&"ghost")
            || mods.contains(&"least")
            || mods.contains(&"greatest")
            || mods.contains(&"inductive");
        let kind = match kw {
            "lemma" => DeclKind::Lemma,
            "function" if is_ghost => DeclKind::GhostFunction,
            "function" => DeclKind::Function,
            "predicate" if is_ghost => DeclKind::GhostPredicate,
            "predicate" => DeclKind::Predicate,
            _ => DeclKind::Method,
        };
        let name = self.name_after(after_kw, hi).unwrap_or_default();
        self.current_decl = name.clone();
        self.loop_counter = 0;

        // Scan header: clauses at depth 0 until the body brace.
        let mut clauses = Vec::new();
        let mut pos = after_kw;
        let mut depth = 0i32;
        let mut body_open = None;
        let mut clause_start: Option<usize> = None;
        let mut end_of_header = pos;
        while pos < hi {
            let t = self.t(pos);
            if self.is_attribute_open(pos) {
                pos = self.skip_braced(pos, hi);
                continue;
            }
            if depth == 0 {
                if self.is_block_open(pos, after_kw) {
                    body_open = Some(pos);
                    break;
                }
                if t == "{" {
                    pos = self.skip_braced(pos, hi);
                    continue;
                }
                if t == "}" || (pos > after_kw && self.starts_decl(pos)) {
                    break;
                }
                if HEADER_CLAUSES.contains(&t) && self.toks[pos].kind == TokenKind::Ident {
                    if let Some(cs) = clause_start.take() {
                        clauses.push(self.make_clause(cs, pos - 1, ClauseSite::DeclHeader, &name));
                    }
                    clause_start = Some(pos);
                }
            }
            match t {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                _ => {}
            }
            pos += 1;
        }
        end_of_header = end_of_header.max(pos);
        if let Some(cs) = clause_start.take() {
            let last = end_of_header.saturating_sub(1).max(cs);
            clauses.push(self.make_clause(cs, last, ClauseSite::DeclHeader, &name));
        }
        let header_last = end_of_header.saturating_sub(1).max(start);
        let header_span = self.tok_span(start, header_last);

        let mut body = Vec::new();
        let mut body_span = None;
        let mut end = end_of_header;
        if let Some(open) = body_open {
            let close = match self.matching_brace(open, hi) {
                Some(c) => c,
                None => {
                    self.warnings.push(format!(
                        "unbalanced braces in {} starting at line {}; body extends to end of file",
                        if name.is_empty() { kw } else { name.as_str() },
                        self.line(start)
                    ));
                    hi - 1
                }
            };
            body_span = Some(self.tok_span(open, close));
            let function_like = matches!(
                kind,
                DeclKind::Function
                    | DeclKind::Predicate
                    | DeclKind::GhostFunction
                    | DeclKind::GhostPredicate
            );
            // function bodies are expressions, not statement lists
            if !function_like {
                body = self.parse_block(open + 1, close.max(open + 1).min(hi), &mut clauses);
            }
            end = close + 1;
            // `function F(...) ... { expr } by method { ... }`
            if self.is(end, "by") && self.is(end + 1, "method") && self.is(end + 2, "{") {
                let open2 = end + 2;
                let close2 = self.matching_brace(open2, hi).unwrap_or(hi - 1);
                let more = self.parse_block(open2 + 1, close2.max(open2 + 1).min(hi), &mut clauses);
                body.extend(more);
                end = close2 + 1;
            }
        }
        let end = end.min(hi).max(start + 1);
        let span = self.tok_span(start, end - 1);
        let attributes = self.collect_attributes(kw_pos, end_of_header.min(hi));
        let is_test = name.starts_with("Test")
            || name == "Main"
            || attributes.iter().any(|a| a.contains(":test"));
        let decl = Declaration {
            kind,
            name,
            is_ghost: is_ghost || kind == DeclKind::Lemma,
            attributes,
            span,
            header_span,
            body_span,
            clauses,
            is_test,
            body,
            container,
        };
        (decl, end)
    }

    fn make_clause(&self, first: usize, last: usize, site: ClauseSite, owner: &str) -> Clause {
        let kind = ClauseKind::from_keyword(self.t(first)).unwrap_or(ClauseKind::Statement);
        let span = self.tok_span(first, last);
        Clause {
            kind,
            site,
            span,
            owner: owner.to_string(),
            is_negative_test: false,
            is_tagged_helper: self.has_helper_tag(&span),
            in_proof_block: false,
            text: span.text(self.src).to_string(),
        }
    }

    fn has_helper_tag(&self, span: &Span) -> bool {
        span.lines().any(|l| {
            self.comments_by_line.get(&l).is_some_and(|cs| {
                cs.iter().any(|c| {
                    let text = c.text(self.src);
                    !text.contains(NEGATIVE_MARKER) && is_helper_comment(text)
                })
            })
        })
    }

    // ----- statements ---------------------------------------------------

    fn parse_block(&mut self, lo: usize, hi: usize, clauses: &mut Vec<Clause>) -> Vec<Stmt> {
        let mut out = Vec::new();
        let mut pos = lo;
        while pos < hi {
            if self.t(pos) == ";" {
                pos += 1;
                continue;
            }
            if self.t(pos) == "}" {
                pos += 1;
                continue;
            }
            let (stmt, next) = self.parse_stmt(pos, hi, clauses, None);
            out.push(stmt);
            pos = next.max(pos + 1);
        }
        out
    }

    /// Index just past a statement terminated by `;` at depth 0, stopping
    /// before an unmatched closer or at `hi`.
    fn scan_to_semicolon(&self, mut pos: usize, hi: usize) -> usize {
        let mut depth = 0i32;
        while pos < hi {
            match self.t(pos) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    if depth == 0 {
                        return pos;
                    }
                    depth -= 1;
                }
                ";" if depth == 0 => return pos + 1,
                _ => {}
            }
            pos += 1;
        }
        hi
    }

    /// Finds a block-opening brace at paren depth 0 before any `;`.
    fn find_block_open(&self, lo: usize, hi: usize) -> Option<usize> {
        let mut depth = 0i32;
        let mut pos = lo;
        while pos < hi {
            if self.is_attribute_open(pos) {
                pos = self.skip_braced(pos, hi);
                continue;
            }
            let t = self.t(pos);
            if depth == 0 {
                if self.is_block_open(pos, lo) {
                    return Some(pos);
                }
                if t == "{" {
                    pos = self.skip_braced(pos, hi);
                    continue;
                }
                if t == ";" || t == "}" {
                    return None;
                }
            }
            match t {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                _ => {}
            }
            pos += 1;
        }
        None
    }

    fn stmt(&self, kind: StmtKind, first: usize, last: usize) -> Stmt {
        Stmt {
            kind,
            span: self.tok_span(first, last),
            children: Vec::new(),
            loop_id: None,
            else_span: None,
            by_span: None,
            body_open: None,
            proof_helper: false,
        }
    }

    fn parse_stmt(
        &mut self,
        pos: usize,
        hi: usize,
        clauses: &mut Vec<Clause>,
        loop_owner: Option<&str>,
    ) -> (Stmt, usize) {
        let t = self.t(pos);
        let owner = self.current_decl.clone();
        match t {
            "{" if !self.is_attribute_open(pos) => {
                let close = self.matching_brace(pos, hi).unwrap_or(hi - 1);
                let mut s = self.stmt(StmtKind::Block, pos, close);
                s.children = self.parse_block(pos + 1, close, clauses);
                (s, close + 1)
            }
            "if" => self.parse_if(pos, hi, clauses),
            "while" | "for" => self.parse_loop(pos, hi, clauses),
            "forall" => match self.find_block_open(pos + 1, hi) {
                Some(open) => {
                    let close = self.matching_brace(open, hi).unwrap_or(hi - 1);
                    let mut s = self.stmt(StmtKind::Forall, pos, close);
                    s.proof_helper = (pos + 1..open).any(|i| self.t(i) == "ensures");
                    let mut inner = Vec::new();
                    s.children = self.parse_block(open + 1, close, &mut inner);
                    for mut c in inner {
                        c.in_proof_block |= s.proof_helper;
                        clauses.push(c);
                    }
                    (s, close + 1)
                }
                None => {
                    let end = self.scan_to_semicolon(pos, hi);
                    (self.stmt(StmtKind::Simple, pos, end.max(pos + 1) - 1), end)
                }
            },
            "calc" | "match" => {
                let kind = if t == "calc" {
                    StmtKind::Calc
                } else {
                    StmtKind::Match
                };
                let mut j = pos + 1;
                let open = loop {
                    if j >= hi || self.t(j) == ";" {
                        break None;
                    }
                    if self.is_attribute_open(j) {
                        j = self.skip_braced(j, hi);
                        continue;
                    }
                    if self.t(j) == "{" {
                        break Some(j);
                    }
                    j += 1;
                };
                let end = match open {
                    Some(o) => self.matching_brace(o, hi).unwrap_or(hi - 1) + 1,
                    None if kind == StmtKind::Match => hi,
                    None => self.scan_to_semicolon(pos, hi),
                };
                let s = self.stmt(kind, pos, end.max(pos + 1) - 1);
                if kind == StmtKind::Calc {
                    let mut c =
                        self.make_clause(pos, end.max(pos + 1) - 1, ClauseSite::Statement, &owner);
                    c.kind = ClauseKind::Calc;
                    clauses.push(c);
                }
                (s, end)
            }
            "assert" => {
                let mut depth = 0i32;
                let mut j = pos + 1;
                let mut by = None;
                let mut end = hi;
                while j < hi {
                    let tj = self.t(j);
                    if depth == 0 && tj == "by" && self.is(j + 1, "{") {
                        by = Some(j);
                        break;
                    }
                    match tj {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            if depth == 0 {
                                end = j;
                                break;
                            }
                            depth -= 1;
                        }
                        ";" if depth == 0 => {
                            end = j + 1;
                            break;
                        }
                        _ => {}
                    }
                    j += 1;
                }
                let mut s;
                if let Some(b) = by {
                    let close = self.matching_brace(b + 1, hi).unwrap_or(hi - 1);
                    s = self.stmt(StmtKind::Assert, pos, close);
                    s.by_span = Some(self.tok_span(b, close));
                    let mut inner = Vec::new();
                    s.children = self.parse_block(b + 2, close, &mut inner);
                    clauses.push(self.make_clause(pos, close, ClauseSite::Statement, &owner));
                    for mut c in inner {
                        c.in_proof_block = true;
                        clauses.push(c);
                    }
                    end = close + 1;
                } else {
                    s = self.stmt(StmtKind::Assert, pos, end.max(pos + 1) - 1);
                    clauses.push(self.make_clause(
                        pos,
                        end.max(pos + 1) - 1,
                        ClauseSite::Statement,
                        &owner,
                    ));
                }
                (s, end)
            }
            "assume" | "expect" => {
                let end = self.scan_to_semicolon(pos, hi);
                let kind = if t == "assume" {
                    StmtKind::Assume
                } else {
                    StmtKind::Expect
                };
                let last = end.max(pos + 1) - 1;
                clauses.push(self.make_clause(pos, last, ClauseSite::Statement, &owner));
                (self.stmt(kind, pos, last), end)
            }
            "ghost" if self.is(pos + 1, "var") => {
                let end = self.scan_to_semicolon(pos, hi);
                let last = end.max(pos + 1) - 1;
                let mut c = self.make_clause(pos, last, ClauseSite::Statement, &owner);
                c.kind = ClauseKind::GhostVar;
                clauses.push(c);
                (self.stmt(StmtKind::GhostVar, pos, last), end)
            }
            _ if MISPLACED.contains(&t) && self.toks[pos].kind == TokenKind::Ident => {
                // A loop clause where a statement is expected; runs to the end
                // of the line where brackets balance.
                let mut depth = 0i32;
                let mut j = pos + 1;
                while j < hi {
                    let tj = self.t(j);
                    if depth == 0
                        && (self.line(j) > self.line(j - 1) || tj == "{" || tj == "}" || tj == ";")
                        && !matches!(
                            self.t(j - 1),
                            "&&" | "||" | "==>" | "<==>" | "," | "(" | "["
                        )
                        && !matches!(tj, "&&" | "||" | "==>" | "<==>" | ")" | "]")
                    {
                        break;
                    }
                    match tj {
                        "(" | "[" => depth += 1,
                        ")" | "]" => depth -= 1,
                        _ => {}
                    }
                    j += 1;
                }
                let owner = loop_owner.map(str::to_string).unwrap_or(owner);
                let mut c = self.make_clause(pos, j - 1, ClauseSite::Misplaced, &owner);
                c.kind = ClauseKind::from_keyword(t).unwrap_or(ClauseKind::Invariant);
                clauses.push(c);
                (self.stmt(StmtKind::MisplacedClause, pos, j - 1), j)
            }
            _ => {
                let end = self.scan_to_semicolon(pos, hi);
                let end = end.max(pos + 1);
                (self.stmt(StmtKind::Simple, pos, end - 1), end)
            }
        }
    }

    fn parse_if(&mut self, pos: usize, hi: usize, clauses: &mut Vec<Clause>) -> (Stmt, usize) {
        let open = if self.is(pos + 1, "{") {
            Some(pos + 1)
        } else {
            self.find_block_open(pos + 1, hi)
        };
        let Some(open) = open else {
            let end = self.scan_to_semicolon(pos, hi).max(pos + 1);
            return (self.stmt(StmtKind::Simple, pos, end - 1), end);
        };
        let close = self.matching_brace(open, hi).unwrap_or(hi - 1);
        let mut children = self.parse_block(open + 1, close, clauses);
        let mut end = close;
        let mut else_span = None;
        if self.is(close + 1, "else") && close + 1 < hi {
            let else_tok = close + 1;
            if self.is(else_tok + 1, "if") {
                let (nested, next) = self.parse_if(else_tok + 1, hi, clauses);
                children.push(nested);
                end = next - 1;
            } else if self.is(else_tok + 1, "{") {
                let c2 = self.matching_brace(else_tok + 1, hi).unwrap_or(hi - 1);
                children.extend(self.parse_block(else_tok + 2, c2, clauses));
                end = c2;
            } else {
                end = else_tok;
            }
            else_span = Some(self.tok_span(else_tok, end));
        }
        let mut s = self.stmt(StmtKind::If, pos, end);
        s.children = children;
        s.else_span = else_span;
        (s, end + 1)
    }

    fn parse_loop(&mut self, pos: usize, hi: usize, clauses: &mut Vec<Clause>) -> (Stmt, usize) {
        self.loop_counter += 1;
        let loop_id = format!("{}#loop{}", self.current_decl, self.loop_counter);
        let mut depth = 0i32;
        let mut j = pos + 1;
        let mut clause_start: Option<usize> = None;
        let mut open = None;
        while j < hi {
            if self.is_attribute_open(j) {
                j = self.skip_braced(j, hi);
                continue;
            }
            let tj = self.t(j);
            if depth == 0 {
                if self.is_block_open(j, pos + 1) {
                    open = Some(j);
                    break;
                }
                if tj == "{" {
                    j = self.skip_braced(j, hi);
                    continue;
                }
                if tj == ";" || tj == "}" {
                    break;
                }
                if LOOP_CLAUSES.contains(&tj) && self.toks[j].kind == TokenKind::Ident {
                    if let Some(cs) = clause_start.take() {
                        clauses.push(self.make_clause(cs, j - 1, ClauseSite::LoopHeader, &loop_id));
                    }
                    clause_start = Some(j);
                }
            }
            match tj {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                _ => {}
            }
            j += 1;
        }
        if let Some(cs) = clause_start.take() {
            clauses.push(self.make_clause(
                cs,
                j.saturating_sub(1).max(cs),
                ClauseSite::LoopHeader,
                &loop_id,
            ));
        }
        let kind = if self.t(pos) == "while" {
            StmtKind::While
        } else {
            StmtKind::For
        };
        match open {
            Some(open) => {
                let close = self.matching_brace(open, hi).unwrap_or(hi - 1);
                let mut s = self.stmt(kind, pos, close);
                s.loop_id = Some(loop_id.clone());
                s.body_open = Some(self.toks[open].start);
                s.children = self.parse_block_in_loop(open + 1, close, clauses, &loop_id);
                (s, close + 1)
            }
            None => {
                let end = if self.is(j, ";") { j + 1 } else { j };
                let end = end.max(pos + 1);
                let mut s = self.stmt(kind, pos, end - 1);
                s.loop_id = Some(loop_id);
                (s, end)
            }
        }
    }

    fn parse_block_in_loop(
        &mut self,
        lo: usize,
        hi: usize,
        clauses: &mut Vec<Clause>,
        loop_id: &str,
    ) -> Vec<Stmt> {
        let mut out = Vec::new();
        let mut pos = lo;
        while pos < hi {
            if matches!(self.t(pos), ";" | "}") {
                pos += 1;
                continue;
            }
            let (stmt, next) = self.parse_stmt(pos, hi, clauses, Some(loop_id));
            out.push(stmt);
            pos = next.max(pos + 1);
        }
        out
    }

    // ----- post-processing ----------------------------------------------

    fn finish_declaration(
        &self,
        d: &mut Declaration,
        lemmas: &BTreeSet<String>,
        comments: &[Token],
    ) {
        fn mark(s: &mut Stmt, src: &str, toks: &[Token], lemmas: &BTreeSet<String>) {
            if s.kind == StmtKind::Simple {
                let first = toks.iter().find(|t| t.start == s.span.start);
                if let Some(f) = first {
                    let word = f.text(src);
                    let next = toks
                        .iter()
                        .find(|t| t.start >= f.end)
                        .map(|t| t.text(src))
                        .unwrap_or("");
                    if word == "reveal" || (lemmas.contains(word) && next == "(") {
                        s.proof_helper = true;
                    }
                }
            }
            for c in &mut s.children {
                mark(c, src, toks, lemmas);
            }
        }
        for s in &mut d.body {
            mark(s, self.src, &self.toks, lemmas);
        }

        // Negative tests: commented-out statements tagged with the marker.
        for c in comments {
            if c.kind != TokenKind::LineComment || !d.span.contains_offset(c.start) {
                continue;
            }
            let line = self.index.line_of(c.start);
            let line_text =
                &self.src[self.index.line_start(line)..self.index.line_end(self.src, line)];
            if !line_text.trim_start().starts_with("//") {
                continue;
            }
            let text = c.text(self.src);
            let Some(marker) = text[2..].find(NEGATIVE_MARKER).map(|m| m + 2) else {
                continue;
            };
            let inner = text[2..marker].trim();
            if inner.is_empty() {
                continue;
            }
            let first_word = inner
                .split(|ch: char| !ch.is_alphanumeric())
                .next()
                .unwrap_or("");
            let kind = match first_word {
                "assert" => ClauseKind::Assert,
                "expect" => ClauseKind::Expect,
                "assume" => ClauseKind::Assume,
                _ => ClauseKind::Statement,
            };
            d.clauses.push(Clause {
                kind,
                site: ClauseSite::NegativeTest,
                span: self.span(c.start, c.end),
                owner: d.name.clone(),
                is_negative_test: true,
                is_tagged_helper: false,
                in_proof_block: false,
                text: text.to_string(),
            });
        }
        d.clauses.sort_by_key(|c| (c.span.start, c.span.end));
    }
}

/// True when a line comment tags its line as a proof helper (`// helper`,
/// `// alternative helper`, ...).
pub(crate) fn is_helper_comment(comment: &str) -> bool {
    let body = comment.trim_start_matches('/').to_ascii_lowercase();
    body.split(|c: char| !c.is_alphanumeric())
        .any(|w| w == "helper")
}

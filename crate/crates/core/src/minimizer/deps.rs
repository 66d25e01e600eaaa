//! Which declarations mention which.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::source::lexer::{tokenize, TokenKind};
use crate::source::SourceFile;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    /// Declaration to the other declarations its text names.
    pub edges: BTreeMap<String, BTreeSet<String>>,
    /// Number of other declarations naming each declaration.
    pub ref_count: BTreeMap<String, usize>,
}

impl DependencyGraph {
    pub fn references(&self, name: &str) -> impl Iterator<Item = &str> {
        self.edges
            .get(name)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn referrers<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges
            .iter()
            .filter(move |(_, to)| to.contains(name))
            .map(|(from, _)| from.as_str())
    }

    pub fn refs(&self, name: &str) -> usize {
        self.ref_count.get(name).copied().unwrap_or(0)
    }
}

/// Edges come from identifier tokens matching declared names; self
/// references are ignored.
pub fn build_dependencies(file: &SourceFile) -> DependencyGraph {
    let names: BTreeSet<&str> = file.declaration_names();
    let tokens = tokenize(&file.text);
    let mut g = DependencyGraph::default();
    for n in &names {
        g.ref_count.insert(n.to_string(), 0);
    }
    for d in &file.declarations {
        let to: BTreeSet<String> = tokens
            .iter()
            .filter(|t| {
                t.kind == TokenKind::Ident && d.span.start <= t.start && t.end <= d.span.end
            })
            .map(|t| t.text(&file.text))
            .filter(|w| *w != d.name && names.contains(w))
            .map(str::to_string)
            .collect();
        g.edges.entry(d.name.clone()).or_default().extend(to);
    }
    for to in g.edges.values() {
        for n in to {
            *g.ref_count.entry(n.clone()).or_default() += 1;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse;

    #[test]
    fn no_references() {
        let g = build_dependencies(&parse("method A() {}\nmethod B() {}\n"));
        assert!(g.edges.values().all(|s| s.is_empty()));
        assert_eq!(g.refs("A"), 0);
    }

    #[test]
    fn call_edge() {
        let g = build_dependencies(&parse("lemma L() {}\nmethod M() {\n  L();\n}\n"));
        assert_eq!(g.references("M").collect::<Vec<_>>(), ["L"]);
        assert_eq!(g.refs("L"), 1);
        assert_eq!(g.referrers("L").collect::<Vec<_>>(), ["M"]);
    }

    #[test]
    fn shared_predicate_and_recursion() {
        let src = "ghost predicate P(x: int) { x > 0 }\n\
ghost function F(n: nat): nat { if n == 0 then 0 else F(n - 1) }\n\
method A(x: int) requires P(x) {}\n\
method B(x: int) requires P(x) && P(x + 1) {}\n";
        let g = build_dependencies(&parse(src));
        assert_eq!(g.refs("P"), 2);
        assert_eq!(g.refs("F"), 0);
    }
}

//! Byte-range text edits.

use crate::source::lexer::LineIndex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Edit {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Applies non-overlapping edits. Edits touching at a boundary are applied in
/// the order given.
pub(crate) fn apply(src: &str, mut edits: Vec<Edit>) -> String {
    edits.sort_by_key(|e| (e.start, e.end));
    let mut out = String::with_capacity(src.len());
    let mut pos = 0;
    for e in edits {
        debug_assert!(e.start >= pos, "overlapping edits");
        let start = e.start.max(pos);
        out.push_str(&src[pos..start]);
        out.push_str(&e.text);
        pos = e.end.max(start);
    }
    out.push_str(&src[pos..]);
    out
}

/// Leading whitespace of the line containing `offset`.
pub(crate) fn indent_at(src: &str, offset: usize) -> &str {
    let index = LineIndex::new(src);
    let ls = index.line_start(index.line_of(offset));
    let line = &src[ls..];
    let n = line.len() - line.trim_start_matches([' ', '\t']).len();
    &line[..n]
}

/// Inserts clause lines just before the block brace at `brace`, indented
/// two columns deeper than the brace's line. A brace sharing its line with a
/// header is moved onto its own line.
pub(crate) fn insert_before_brace(src: &str, brace: usize, clauses: &[String]) -> Edit {
    let index = LineIndex::new(src);
    let ls = index.line_start(index.line_of(brace));
    let prefix = &src[ls..brace];
    let indent = indent_at(src, brace).to_string();
    let body: Vec<String> = clauses
        .iter()
        .map(|c| format!("{indent}  {}", c.trim()))
        .collect();
    if prefix.trim().is_empty() {
        Edit {
            start: ls,
            end: ls,
            text: body.iter().map(|l| format!("{l}\n")).collect(),
        }
    } else {
        let ws_start = ls + prefix.trim_end().len();
        Edit {
            start: ws_start,
            end: brace + 1,
            text: format!("\n{}\n{indent}{{", body.join("\n")),
        }
    }
}

/// Removes byte ranges line by line. A touched line left with no code is
/// dropped together with any comment on it; otherwise the gaps are closed
/// without disturbing indentation.
pub(crate) fn remove_ranges(src: &str, ranges: &[(usize, usize)]) -> String {
    let mut rs: Vec<(usize, usize)> = ranges.iter().copied().filter(|r| r.0 < r.1).collect();
    rs.sort();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in rs {
        match merged.last_mut() {
            Some(last) if r.0 <= last.1 => last.1 = last.1.max(r.1),
            _ => merged.push(r),
        }
    }
    if merged.is_empty() {
        return src.to_string();
    }
    let removed = |b: usize| merged.iter().any(|r| r.0 <= b && b < r.1);
    let code: Vec<(usize, usize)> = crate::source::lexer::tokenize(src)
        .into_iter()
        .filter(|t| !t.is_comment())
        .map(|t| (t.start, t.end))
        .collect();

    let mut out = String::with_capacity(src.len());
    let mut ls = 0;
    for raw in src.split_inclusive('\n') {
        let le_full = ls + raw.len();
        let content_len = raw.trim_end_matches(['\n', '\r']).len();
        let le = ls + content_len;
        let ending = &raw[content_len..];
        let touched = merged.iter().any(|r| r.0 < le && ls < r.1)
            || merged.iter().any(|r| r.0 < ls && le <= r.1);
        if !touched {
            out.push_str(raw);
            ls = le_full;
            continue;
        }
        let code_left = code.iter().any(|&(s, _)| s >= ls && s < le && !removed(s));
        if !code_left {
            ls = le_full;
            continue;
        }
        // kept pieces with a flag for a cut right after them
        let mut pieces: Vec<(usize, usize, bool)> = Vec::new();
        let mut b = ls;
        while b < le {
            if removed(b) {
                if let Some(p) = pieces.last_mut() {
                    p.2 = true;
                }
                let r = merged.iter().find(|r| r.0 <= b && b < r.1).unwrap();
                b = r.1.min(le);
                if pieces.is_empty() {
                    pieces.push((ls, ls, true));
                }
                continue;
            }
            let next_cut = merged
                .iter()
                .filter(|r| r.0 > b)
                .map(|r| r.0)
                .min()
                .unwrap_or(le)
                .min(le);
            pieces.push((b, next_cut, false));
            b = next_cut;
        }
        let mut line = String::new();
        for (i, &(s, e, cut_after)) in pieces.iter().enumerate() {
            let mut p = &src[s..e];
            if i > 0 && line.trim().is_empty() {
                p = p.trim_start();
            }
            if cut_after && !(i == 0 && p.trim().is_empty()) {
                p = p.trim_end();
            }
            line.push_str(p);
        }
        out.push_str(&line);
        out.push_str(ending);
        ls = le_full;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_removal_closes_gap() {
        let src = "method M() ensures x {\n}\n";
        let s = src.find("ensures").unwrap();
        assert_eq!(remove_ranges(src, &[(s, s + 9)]), "method M() {\n}\n");
    }

    #[test]
    fn line_with_only_comment_left_is_dropped() {
        let src = "a;\n  assert x; // helper\nb;\n";
        let s = src.find("assert").unwrap();
        assert_eq!(remove_ranges(src, &[(s, s + 9)]), "a;\nb;\n");
    }

    #[test]
    fn leading_removal_keeps_indent() {
        let src = "  ensures x {\n";
        assert_eq!(remove_ranges(src, &[(2, 11)]), "  {\n");
    }

    #[test]
    fn brace_split() {
        let src = "  while c {\n    x := 1;\n  }\n";
        let e = insert_before_brace(src, src.find('{').unwrap(), &["invariant I".into()]);
        assert_eq!(
            apply(src, vec![e]),
            "  while c\n    invariant I\n  {\n    x := 1;\n  }\n"
        );
    }

    #[test]
    fn brace_on_own_line() {
        let src = "method M()\n{\n}\n";
        let e = insert_before_brace(src, src.find('{').unwrap(), &["ensures true".into()]);
        assert_eq!(apply(src, vec![e]), "method M()\n  ensures true\n{\n}\n");
    }
}

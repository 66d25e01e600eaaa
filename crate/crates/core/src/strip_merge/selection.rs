//! Restricting generation to the declarations under a line selection.

use std::collections::BTreeSet;

use crate::source::{parse, SourceFile};

use super::strip::strip_text;

/// Names of the declarations whose lines overlap `start_line..=end_line`.
pub fn selected_declarations(
    file: &SourceFile,
    start_line: usize,
    end_line: usize,
) -> BTreeSet<String> {
    file.declarations
        .iter()
        .filter(|d| d.span.start_line <= end_line && start_line <= d.span.end_line)
        .map(|d| d.name.clone())
        .collect()
}

/// `text` with only the `selected` declarations stripped.
pub fn strip_selected(text: &str, selected: &BTreeSet<String>) -> String {
    let stripped = strip_text(text);
    let keep: BTreeSet<String> = parse(text)
        .declarations
        .iter()
        .map(|d| d.name.clone())
        .filter(|n| !selected.contains(n))
        .collect();
    splice_declarations(&stripped, text, &keep, false)
}

/// `target` with each declaration named in `names` replaced by its version
/// in `source`. With `add_new`, declarations of `source` unknown to `target`
/// go right before the first replaced one. Names missing on either side are
/// left alone; nested declarations follow their container.
pub fn splice_declarations(
    target: &str,
    source: &str,
    names: &BTreeSet<String>,
    add_new: bool,
) -> String {
    let t = parse(target);
    let s = parse(source);
    let mut edits: Vec<(usize, usize, String)> = Vec::new();
    for d in &t.declarations {
        if !names.contains(&d.name)
            || edits
                .iter()
                .any(|e| e.0 <= d.span.start && d.span.end <= e.1)
        {
            continue;
        }
        if let Some(src) = s.declaration(&d.name) {
            edits.push((d.span.start, d.span.end, src.span.text(source).to_string()));
        }
    }
    edits.sort_by_key(|e| e.0);
    if add_new {
        let known = t.declaration_names();
        let fresh: Vec<&str> = s
            .declarations
            .iter()
            .filter(|d| d.container.is_none() && !known.contains(d.name.as_str()))
            .map(|d| d.span.text(source))
            .collect();
        if let (false, Some(first)) = (fresh.is_empty(), edits.first_mut()) {
            let mut text = String::new();
            for f in fresh {
                text.push_str(f);
                text.push_str("\n\n");
            }
            text.push_str(&first.2);
            first.2 = text;
        }
    }
    let mut out = target.to_string();
    for (start, end, text) in edits.into_iter().rev() {
        out.replace_range(start..end, &text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUF: &str = "\
function Double(x: int): int { 2 * x }

method A(x: int) returns (y: int)
  ensures y == x
{
  y := x;
}

method B(x: int) returns (y: int)
  ensures y == 2 * x
{
  y := x + x;
}
";

    fn names(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn selection_picks_overlapping_declarations() {
        let f = parse(BUF);
        assert_eq!(selected_declarations(&f, 9, 9), names(&["B"]));
        assert_eq!(selected_declarations(&f, 5, 9), names(&["A", "B"]));
        assert!(selected_declarations(&f, 8, 8).is_empty());
    }

    #[test]
    fn only_selected_declarations_lose_annotations() {
        let s = strip_selected(BUF, &names(&["B"]));
        assert!(s.contains("ensures y == x\n"));
        assert!(!s.contains("ensures y == 2 * x"));
        assert!(s.contains("y := x + x;"));
    }

    #[test]
    fn splice_keeps_unselected_text_and_adds_helpers() {
        let base = strip_selected(BUF, &names(&["B"]));
        let cand = BUF
            .replace("ensures y == x\n", "ensures y == x + 0\n")
            .replace("ensures y == 2 * x", "ensures y == Twice(x)")
            + "\nghost function Twice(x: int): int { x + x }\n";
        let out = splice_declarations(&base, &cand, &names(&["B"]), true);
        assert!(
            out.contains("ensures y == x\n"),
            "unselected A comes from the buffer"
        );
        assert!(out.contains("ensures y == Twice(x)"));
        let twice = out.find("ghost function Twice").unwrap();
        assert!(twice < out.find("method B").unwrap() && twice > out.find("method A").unwrap());
        assert_eq!(
            splice_declarations(&base, &cand, &names(&["Nope"]), true),
            base
        );
    }
}

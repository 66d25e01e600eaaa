use std::collections::BTreeSet;

use crate::minimizer::delta::units;
use crate::source::{collapse_whitespace, Clause, ClauseKind, SourceFile};

use super::edit::{apply, insert_before_brace, Edit};
use super::strip::strip_text;
use super::StripError;

/// Executable skeleton: unit keys of the stripped program. Asserts are left
/// out because a kept helper assert in a test is not a program change.
fn skeleton(text: &str) -> Vec<String> {
    units(&strip_text(text))
        .into_iter()
        .map(|u| u.key)
        .filter(|k| !k.starts_with("assert "))
        .collect()
}

/// Manual clauses absent from the candidate, by whitespace-collapsed text.
/// A `decreases` is only contributed when the candidate has none.
fn missing<'a>(
    cand: impl Iterator<Item = &'a Clause>,
    manual: impl Iterator<Item = &'a Clause>,
) -> Vec<String> {
    let cand: Vec<&Clause> = cand.collect();
    let have: BTreeSet<String> = cand.iter().map(|c| collapse_whitespace(&c.text)).collect();
    let has_decreases = cand.iter().any(|c| c.kind == ClauseKind::Decreases);
    manual
        .filter(|c| c.kind.is_specification() || c.kind == ClauseKind::Modifies)
        .filter(|c| !(c.kind == ClauseKind::Decreases && has_decreases))
        .filter(|c| !have.contains(&collapse_whitespace(&c.text)))
        .map(|c| c.text.clone())
        .collect()
}

/// Candidate text with the manual solution's specification clauses unioned
/// per declaration and loop, and its missing helper declarations appended.
pub fn merge_with_manual(
    candidate: &SourceFile,
    manual: &SourceFile,
) -> Result<String, StripError> {
    let (a, b) = (skeleton(&candidate.text), skeleton(&manual.text));
    if a != b {
        let at = a
            .iter()
            .zip(&b)
            .position(|(x, y)| x != y)
            .unwrap_or(a.len().min(b.len()));
        let detail = format!(
            "candidate has `{}` where the manual solution has `{}`",
            a.get(at).map_or("<end>", String::as_str),
            b.get(at).map_or("<end>", String::as_str)
        );
        return Err(StripError::SkeletonMismatch(detail));
    }

    let text = &candidate.text;
    let mut edits: Vec<Edit> = Vec::new();
    for cd in candidate
        .declarations
        .iter()
        .filter(|d| !d.is_annotation() && !d.name.is_empty())
    {
        let Some(md) = manual
            .declarations
            .iter()
            .find(|m| m.name == cd.name && m.container == cd.container)
        else {
            continue;
        };
        let add = missing(cd.header_clauses(), md.header_clauses());
        if !add.is_empty() {
            match cd.body_span {
                Some(body) => edits.push(insert_before_brace(text, body.start, &add)),
                None => {
                    let at = cd.header_span.end;
                    let lines: String = add.iter().map(|c| format!("\n  {}", c.trim())).collect();
                    edits.push(Edit {
                        start: at,
                        end: at,
                        text: lines,
                    });
                }
            }
        }
        for s in cd.statements() {
            let (Some(id), Some(open)) = (&s.loop_id, s.body_open) else {
                continue;
            };
            let add = missing(cd.loop_clauses(id), md.loop_clauses(id));
            if !add.is_empty() {
                edits.push(insert_before_brace(text, open, &add));
            }
        }
    }
    let mut out = apply(text, edits);

    let present = candidate.declaration_names();
    for md in manual.declarations.iter().filter(|d| d.is_annotation()) {
        if present.contains(md.name.as_str()) {
            continue;
        }
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out.push('\n');
        out.push_str(md.span.text(&manual.text));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse;

    const MANUAL: &str = "\
ghost function Sum(n: nat): nat { if n == 0 then 0 else n + Sum(n - 1) }

method Total(n: nat) returns (s: nat)
  ensures s == Sum(n)
  ensures s >= 0
{
  s := 0;
  var i := 0;
  while i < n
    invariant 0 <= i <= n
    invariant s == Sum(i)
  {
    i := i + 1;
    s := s + i;
  }
}
";

    fn clause_texts(text: &str) -> Vec<String> {
        let mut v: Vec<String> = parse(text)
            .clauses()
            .map(|c| collapse_whitespace(&c.text))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn self_merge_is_identity() {
        let m = parse(MANUAL);
        assert_eq!(merge_with_manual(&m, &m).unwrap(), MANUAL);
    }

    #[test]
    fn missing_clauses_and_helpers_are_added() {
        let cand = "\
method Total(n: nat) returns (s: nat)
  ensures s >= 0
{
  s := 0;
  var i := 0;
  while i < n
    invariant 0 <= i <= n
  {
    i := i + 1;
    s := s + i;
  }
}
";
        let out = merge_with_manual(&parse(cand), &parse(MANUAL)).unwrap();
        assert_eq!(clause_texts(&out), clause_texts(MANUAL));
        let f = parse(&out);
        let d = f.declaration("Total").unwrap();
        let ens: Vec<_> = d.header_clauses().map(|c| c.text.as_str()).collect();
        assert_eq!(ens, vec!["ensures s >= 0", "ensures s == Sum(n)"]);
        assert!(f.declaration("Sum").is_some());
    }

    #[test]
    fn renamed_method_is_a_skeleton_mismatch() {
        let cand = MANUAL.replace("method Total", "method Total2");
        assert!(matches!(
            merge_with_manual(&parse(&cand), &parse(MANUAL)),
            Err(StripError::SkeletonMismatch(_))
        ));
    }
}

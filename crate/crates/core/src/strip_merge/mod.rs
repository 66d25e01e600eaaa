//! Conventional-program stripping, post-processing of model outputs,
//! cheating detection and merging with manual solutions.

mod cheating;
pub(crate) mod edit;
mod merge;
mod relocate;
mod selection;
mod strip;

pub use cheating::{detect_cheating, Violation, ViolationKind};
pub use merge::merge_with_manual;
pub use relocate::relocate_invariants;
pub use selection::{selected_declarations, splice_declarations, strip_selected};
pub use strip::{strip_annotations, strip_text};

use crate::source::parse::NEGATIVE_MARKER;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StripError {
    #[error("model output contains no BEGIN DAFNY/END DAFNY block and no fenced code block")]
    NoCodeBlock,
    #[error("candidate and manual solution differ in executable code: {0}")]
    SkeletonMismatch(String),
    #[error("negative test #{index} not found ({available} present)")]
    NoSuchMarker { index: usize, available: usize },
}

const BEGIN: &str = "BEGIN DAFNY";
const END: &str = "END DAFNY";

/// Drops the rest of an opening tag line and trailing whitespace.
fn trim_block(s: &str) -> &str {
    let s = match s.find('\n') {
        Some(n) if s[..n].trim().is_empty() => &s[n + 1..],
        _ => s,
    };
    s.trim_end()
}

fn strip_fences(s: &str) -> String {
    let mut lines: Vec<&str> = s.lines().collect();
    if lines
        .first()
        .is_some_and(|l| l.trim_start().starts_with("```"))
    {
        lines.remove(0);
    }
    if lines
        .last()
        .is_some_and(|l| l.trim_start().starts_with("```"))
    {
        lines.pop();
    }
    lines.join("\n").trim_end().to_string()
}

fn first_fence(s: &str) -> Option<&str> {
    let open = s.find("```")?;
    let body_start = open + s[open..].find('\n')? + 1;
    let close = s[body_start..]
        .find("```")
        .map_or(s.len(), |c| body_start + c);
    Some(&s[body_start..close])
}

/// The program between the first `BEGIN DAFNY` and the following
/// `END DAFNY`, or else the first fenced code block.
pub fn extract_code_block(output: &str) -> Result<String, StripError> {
    if let Some(b) = output.find(BEGIN) {
        let after = &output[b + BEGIN.len()..];
        let inner = after.find(END).map_or(after, |e| &after[..e]);
        let code = strip_fences(trim_block(inner));
        if !code.trim().is_empty() {
            return Ok(code);
        }
    }
    if let Some(block) = first_fence(output) {
        let code = block.trim_end().to_string();
        if !code.trim().is_empty() {
            return Ok(code);
        }
    }
    Err(StripError::NoCodeBlock)
}

/// Lines that hold a commented-out negative test.
pub fn negative_test_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim_start();
            t.starts_with("//")
                && t[2..]
                    .find(NEGATIVE_MARKER)
                    .is_some_and(|m| !t[2..2 + m].trim().is_empty())
        })
        .map(|(i, _)| i + 1)
        .collect()
}

/// Uncomments the `marker_index`-th (1-based) negative test, keeping its
/// trailing marker.
pub fn activate_negative_test(text: &str, marker_index: usize) -> Result<String, StripError> {
    let lines = negative_test_lines(text);
    let Some(&line) = marker_index.checked_sub(1).and_then(|i| lines.get(i)) else {
        return Err(StripError::NoSuchMarker {
            index: marker_index,
            available: lines.len(),
        });
    };
    let mut out = String::with_capacity(text.len());
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            let indent = raw.len() - raw.trim_start().len();
            let rest = &raw[indent + 2..];
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            out.push_str(&raw[..indent]);
            out.push_str(rest);
        } else {
            out.push_str(raw);
        }
    }
    Ok(out)
}

//! Round-based deletion of redundant inserted segments.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use super::candidates::{extract_candidates, traversal_order, CandidateSegment, Category};
use super::delta::{compute_delta, DeltaError};
use super::deps::{build_dependencies, DependencyGraph};
use crate::source::{collapse_whitespace, count_loc, parse, SourceFile};
use crate::strip_merge::edit::{apply, remove_ranges, Edit};
use crate::verifier::{
    cache_key, VerificationOutcome, VerificationStatus, Verifier, VerifierConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    /// Executable and extra arguments; timeout and filter are set per check.
    pub verifier: VerifierConfig,
    pub short_timeout_s: f64,
    /// Timeout for the initial check of the extended program.
    pub job_timeout_s: f64,
    pub use_filter_symbol: bool,
    /// Reject removals that slow verification by more than this factor.
    pub max_slowdown: Option<f64>,
    pub max_rounds: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            verifier: VerifierConfig::default(),
            short_timeout_s: 10.0,
            job_timeout_s: 60.0,
            use_filter_symbol: true,
            max_slowdown: None,
            max_rounds: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalKind {
    Candidate(Category),
    UnreferencedDeclaration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalRecord {
    /// 0 for declarations dropped before the first round.
    pub round: usize,
    pub kind: RemovalKind,
    pub declaration: String,
    /// Line range in the text the removal was applied to.
    pub start_line: usize,
    pub end_line: usize,
    pub text: String,
    pub loc_before: usize,
    pub loc_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub text: String,
    pub removals: Vec<RemovalRecord>,
    pub rounds: usize,
    pub verifier_calls: usize,
    pub cache_hits: usize,
    pub skipped_ineligible: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinimizeError {
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error("extended program does not verify ({0:?})")]
    ExtendedDoesNotVerify(VerificationStatus),
    #[error("verifier tool error: {message}")]
    Tool {
        message: String,
        partial: Box<MinimizeResult>,
    },
}

fn loc(text: &str) -> usize {
    count_loc(&parse(text)).total()
}

fn apply_one(text: &str, c: &CandidateSegment) -> String {
    match &c.replacement {
        Some(r) => apply(
            text,
            vec![Edit {
                start: c.span.start,
                end: c.span.end,
                text: r.clone(),
            }],
        ),
        None => remove_ranges(text, &[(c.span.start, c.span.end)]),
    }
}

/// Deletes a set of candidates of `text`. Candidates nested in another
/// selected candidate are subsumed by it.
pub fn apply_removals(text: &str, cands: &[CandidateSegment]) -> String {
    let mut sel: Vec<&CandidateSegment> = cands.iter().collect();
    sel.sort_by(|a, b| {
        a.span
            .start
            .cmp(&b.span.start)
            .then(b.span.end.cmp(&a.span.end))
    });
    let mut kept: Vec<&CandidateSegment> = Vec::new();
    for c in sel {
        if kept
            .iter()
            .any(|k| k.span.start <= c.span.start && c.span.start < k.span.end)
        {
            continue;
        }
        kept.push(c);
    }
    let mut out = text.to_string();
    for c in kept.iter().rev() {
        out = apply_one(&out, c);
    }
    out
}

/// Repeatedly drops declarations outside `protected` that nothing
/// references. Returns the new text and what was dropped.
pub fn remove_unreferenced(
    text: &str,
    protected: &BTreeSet<String>,
) -> (String, Vec<(String, usize, usize, String)>) {
    let mut text = text.to_string();
    let mut dropped = Vec::new();
    loop {
        let file = parse(&text);
        let g = build_dependencies(&file);
        let dead: Vec<_> = file
            .declarations
            .iter()
            .filter(|d| !protected.contains(&d.name) && g.refs(&d.name) == 0)
            .collect();
        if dead.is_empty() {
            return (text, dropped);
        }
        let ranges: Vec<(usize, usize)> = dead.iter().map(|d| (d.span.start, d.span.end)).collect();
        for d in &dead {
            dropped.push((
                d.name.clone(),
                d.span.start_line,
                d.span.end_line,
                d.span.text(&file.text).to_string(),
            ));
        }
        text = remove_ranges(&text, &ranges);
    }
}

/// Stable identity of a candidate across re-extractions.
type CandId = (Category, String, String, usize);

fn identities(cands: &[CandidateSegment]) -> Vec<CandId> {
    let mut seen: HashMap<(Category, String, String), usize> = HashMap::new();
    cands
        .iter()
        .map(|c| {
            let k = (
                c.category,
                c.owner_decl.clone(),
                collapse_whitespace(&c.text),
            );
            let n = seen.entry(k.clone()).or_default();
            *n += 1;
            (k.0, k.1, k.2, *n - 1)
        })
        .collect()
}

struct Job<'a> {
    original: &'a str,
    protected: BTreeSet<String>,
    verifier: &'a dyn Verifier,
    opts: &'a MinimizeOptions,
    memo: HashMap<String, VerificationOutcome>,
    result: MinimizeResult,
}

impl Job<'_> {
    async fn verify(&mut self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome {
        let key = cache_key(text, cfg);
        if let Some(o) = self.memo.get(&key) {
            self.result.cache_hits += 1;
            return o.clone();
        }
        self.result.verifier_calls += 1;
        let o = self.verifier.verify(text, cfg).await;
        if o.status != VerificationStatus::ToolError {
            self.memo.insert(key, o.clone());
        }
        o
    }

    fn cfg(&self, filter: Option<String>) -> VerifierConfig {
        VerifierConfig {
            timeout_s: self.opts.short_timeout_s,
            filter_symbol: filter,
            ..self.opts.verifier.clone()
        }
    }

    fn candidates(&self, text: &str) -> Result<(SourceFile, Vec<CandidateSegment>), DeltaError> {
        let delta = compute_delta(self.original, text)?;
        let file = parse(text);
        let cands = extract_candidates(&delta, &file);
        Ok((file, cands))
    }

    fn drop_unreferenced(&mut self, round: usize) {
        let (text, dropped) = remove_unreferenced(&self.result.text, &self.protected);
        if dropped.is_empty() {
            return;
        }
        let mut before = loc(&self.result.text);
        for (name, start_line, end_line, body) in dropped {
            // each dropped declaration is logged against the running total
            let after = before - loc(&body).min(before);
            self.result.removals.push(RemovalRecord {
                round,
                kind: RemovalKind::UnreferencedDeclaration,
                declaration: name,
                start_line,
                end_line,
                text: body,
                loc_before: before,
                loc_after: after,
            });
            before = after;
        }
        self.result.text = text;
    }
}

struct Clock {
    now: u64,
    header: HashMap<String, u64>,
    body: HashMap<String, u64>,
    checked: HashMap<CandId, u64>,
}

impl Clock {
    fn modified_since(&self, decl: &str, t: u64) -> bool {
        self.header.get(decl).is_some_and(|&m| m > t) || self.body.get(decl).is_some_and(|&m| m > t)
    }

    fn eligible(&self, id: &CandId, c: &CandidateSegment, deps: &DependencyGraph) -> bool {
        let Some(&t) = self.checked.get(id) else {
            return true;
        };
        let d = c.owner_decl.as_str();
        self.modified_since(d, t)
            || deps
                .references(d)
                .any(|r| self.header.get(r).is_some_and(|&m| m > t))
            || (c.in_header && deps.referrers(d).any(|r| self.modified_since(r, t)))
    }
}

/// Shrinks `extended` toward `original` while it keeps verifying.
pub async fn minimize(
    original: &str,
    extended: &str,
    verifier: &dyn Verifier,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult, MinimizeError> {
    compute_delta(original, extended)?;
    let mut job = Job {
        original,
        protected: parse(original)
            .declarations
            .iter()
            .map(|d| d.name.clone())
            .collect(),
        verifier,
        opts,
        memo: HashMap::new(),
        result: MinimizeResult {
            text: extended.to_string(),
            removals: Vec::new(),
            rounds: 0,
            verifier_calls: 0,
            cache_hits: 0,
            skipped_ineligible: 0,
        },
    };
    let full = VerifierConfig {
        timeout_s: opts.job_timeout_s,
        filter_symbol: None,
        ..opts.verifier.clone()
    };
    let initial = job.verify(extended, &full).await;
    match initial.status {
        VerificationStatus::Success => {}
        VerificationStatus::ToolError => {
            return Err(MinimizeError::Tool {
                message: initial.tool_message.unwrap_or_default(),
                partial: Box::new(job.result),
            })
        }
        s => return Err(MinimizeError::ExtendedDoesNotVerify(s)),
    }
    job.drop_unreferenced(0);

    let mut clock = Clock {
        now: 0,
        header: HashMap::new(),
        body: HashMap::new(),
        checked: HashMap::new(),
    };
    let mut baselines: HashMap<Option<String>, f64> = HashMap::new();

    for round in 1..=opts.max_rounds {
        job.result.rounds = round;
        let (file, mut cands) = job.candidates(&job.result.text)?;
        let mut deps = build_dependencies(&file);
        traversal_order(&mut cands);
        let snapshot = identities(&cands);
        let mut current: HashMap<CandId, CandidateSegment> = snapshot
            .iter()
            .cloned()
            .zip(cands.iter().cloned())
            .collect();
        let mut committed = false;

        for id in snapshot {
            let Some(c) = current.get(&id).cloned() else {
                continue;
            };
            if !clock.eligible(&id, &c, &deps) {
                job.result.skipped_ineligible += 1;
                continue;
            }
            let tentative = apply_one(&job.result.text, &c);
            let owner_has_body = file
                .declaration(&c.owner_decl)
                .is_some_and(|d| d.has_statements());
            let filter = (opts.use_filter_symbol && !c.in_header && owner_has_body)
                .then(|| c.owner_decl.clone());
            let cfg = job.cfg(filter.clone());
            let outcome = job.verify(&tentative, &cfg).await;
            clock.now += 1;
            let mut accept = match outcome.status {
                VerificationStatus::Success => true,
                VerificationStatus::ToolError => {
                    return Err(MinimizeError::Tool {
                        message: outcome.tool_message.unwrap_or_default(),
                        partial: Box::new(job.result),
                    })
                }
                _ => false,
            };
            if accept {
                if let Some(factor) = opts.max_slowdown {
                    let base = match baselines.get(&filter) {
                        Some(b) => *b,
                        None => {
                            let text = job.result.text.clone();
                            let b = job.verify(&text, &cfg).await.elapsed_s;
                            baselines.insert(filter.clone(), b);
                            b
                        }
                    };
                    accept = outcome.elapsed_s <= base * factor;
                }
            }
            let before = loc(&job.result.text);
            let after = loc(&tentative);
            if !accept || after >= before {
                clock.checked.insert(id, clock.now);
                continue;
            }

            job.result.removals.push(RemovalRecord {
                round,
                kind: RemovalKind::Candidate(c.category),
                declaration: c.owner_decl.clone(),
                start_line: c.span.start_line,
                end_line: c.span.end_line,
                text: c.text.clone(),
                loc_before: before,
                loc_after: after,
            });
            job.result.text = tentative;
            job.drop_unreferenced(round);
            if c.in_header {
                clock.header.insert(c.owner_decl.clone(), clock.now);
            } else {
                clock.body.insert(c.owner_decl.clone(), clock.now);
            }
            baselines.clear();
            committed = true;

            let (file2, cands2) = job.candidates(&job.result.text)?;
            deps = build_dependencies(&file2);
            current = identities(&cands2).into_iter().zip(cands2).collect();
        }
        if !committed {
            break;
        }
    }
    Ok(job.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::FnVerifier;

    const ORIG: &str = "method M(n: nat) returns (r: nat)\n{\n  r := 0;\n  var i := 0;\n  while i < n\n  {\n    r := r + 1;\n    i := i + 1;\n  }\n}\n";

    const EXT: &str = "method M(n: nat) returns (r: nat)\n  ensures r == n\n{\n  r := 0;\n  var i := 0;\n  while i < n\n    invariant i <= n\n    invariant r == i\n  {\n    r := r + 1;\n    i := i + 1;\n    assert r == i;\n  }\n}\n";

    fn oracle(
        required: &'static [&'static str],
    ) -> FnVerifier<impl Fn(&str, &VerifierConfig) -> VerificationOutcome> {
        FnVerifier::new(move |t: &str, _: &VerifierConfig| {
            if required.iter().all(|r| t.contains(r)) {
                VerificationOutcome::success(1)
            } else {
                VerificationOutcome::failure(0, vec![])
            }
        })
    }

    #[tokio::test]
    async fn redundant_assert_removed_in_two_rounds() {
        let v = oracle(&["ensures r == n", "invariant i <= n", "invariant r == i"]);
        let r = minimize(ORIG, EXT, &v, &MinimizeOptions::default())
            .await
            .unwrap();
        assert!(!r.text.contains("assert"));
        assert!(r.text.contains("invariant r == i"));
        assert_eq!(r.rounds, 2);
        assert_eq!(r.removals.len(), 1);
        assert_eq!(
            r.removals[0].kind,
            RemovalKind::Candidate(Category::Statement)
        );
    }

    #[tokio::test]
    async fn necessary_invariant_is_kept() {
        let v = oracle(&["ensures r == n", "invariant r == i"]);
        let r = minimize(ORIG, EXT, &v, &MinimizeOptions::default())
            .await
            .unwrap();
        assert!(r.text.contains("invariant r == i"));
        assert!(!r.text.contains("invariant i <= n"));
        let again = minimize(ORIG, &r.text, &v, &MinimizeOptions::default())
            .await
            .unwrap();
        assert!(again.removals.is_empty());
    }

    #[tokio::test]
    async fn non_verifying_input_and_tool_errors() {
        let v = oracle(&["never present"]);
        assert!(matches!(
            minimize(ORIG, EXT, &v, &MinimizeOptions::default()).await,
            Err(MinimizeError::ExtendedDoesNotVerify(
                VerificationStatus::VerificationFailure
            ))
        ));
        let altered = EXT.replace("r := 0;", "r := 1;");
        assert!(matches!(
            minimize(ORIG, &altered, &v, &MinimizeOptions::default()).await,
            Err(MinimizeError::Delta(_))
        ));
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let flaky = FnVerifier::new(move |_: &str, _: &VerifierConfig| {
            if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 {
                VerificationOutcome::success(1)
            } else {
                VerificationOutcome::tool_error("crashed")
            }
        });
        match minimize(ORIG, EXT, &flaky, &MinimizeOptions::default()).await {
            Err(MinimizeError::Tool { partial, .. }) => assert_eq!(partial.text, EXT),
            other => panic!("{other:?}"),
        }
    }

    #[tokio::test]
    async fn unreferenced_helpers_cascade() {
        let orig = "method M(x: int) returns (y: int)\n{\n  y := x;\n}\n";
        let ext = "ghost predicate Q(x: int) { x == x }\nghost predicate P(x: int) { Q(x) }\nmethod M(x: int) returns (y: int)\n  ensures P(y)\n  ensures y == x\n{\n  y := x;\n}\n";
        let v = oracle(&["ensures y == x"]);
        let r = minimize(orig, ext, &v, &MinimizeOptions::default())
            .await
            .unwrap();
        assert_eq!(
            r.text,
            "method M(x: int) returns (y: int)\n  ensures y == x\n{\n  y := x;\n}\n"
        );
        let kinds: Vec<_> = r.removals.iter().map(|x| x.kind).collect();
        assert_eq!(
            kinds,
            [
                RemovalKind::Candidate(Category::DeclSpecClause),
                RemovalKind::UnreferencedDeclaration,
                RemovalKind::UnreferencedDeclaration
            ]
        );
    }

    #[tokio::test]
    async fn filter_symbol_only_for_body_deletions() {
        let calls = std::sync::Mutex::new(Vec::new());
        let first = std::sync::atomic::AtomicBool::new(true);
        let rec = FnVerifier::new(|_: &str, cfg: &VerifierConfig| {
            calls
                .lock()
                .unwrap()
                .push((cfg.filter_symbol.clone(), cfg.timeout_s));
            if first.swap(false, std::sync::atomic::Ordering::SeqCst) {
                VerificationOutcome::success(1)
            } else {
                VerificationOutcome::failure(0, vec![])
            }
        });
        minimize(ORIG, EXT, &rec, &MinimizeOptions::default())
            .await
            .unwrap();
        let calls = calls.into_inner().unwrap();
        assert_eq!(calls[0], (None, 60.0));
        assert!(calls[1..].iter().all(|c| c.1 == 10.0));
        assert!(calls.contains(&(Some("M".into()), 10.0)));
        assert!(calls.contains(&(None, 10.0)));
    }
}

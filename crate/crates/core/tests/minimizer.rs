use annot_core::minimizer::{
    apply_removals, compute_delta, extract_candidates, minimize, remove_unreferenced,
    MinimizeOptions, RemovalKind,
};
use annot_core::source::{count_loc, parse};
use annot_core::verifier::{normalize_for_cache, FnVerifier, VerificationOutcome, VerifierConfig};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Verifies iff every `require` is present and every present `if` has its `then`.
#[derive(Deserialize)]
struct Oracle {
    require: Vec<String>,
    implies: Vec<(String, String)>,
}

impl Oracle {
    fn accepts(&self, text: &str) -> bool {
        self.require.iter().all(|r| text.contains(r.as_str()))
            && self
                .implies
                .iter()
                .all(|(a, b)| !text.contains(a.as_str()) || text.contains(b.as_str()))
    }
}

struct Case {
    name: String,
    original: String,
    extended: String,
    oracle: Oracle,
}

fn corpus() -> Vec<Case> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/minimizer");
    let mut dirs: Vec<_> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|d| Case {
            name: d.file_name().unwrap().to_string_lossy().into_owned(),
            original: std::fs::read_to_string(d.join("original.dfy")).unwrap(),
            extended: std::fs::read_to_string(d.join("extended.dfy")).unwrap(),
            oracle: serde_json::from_str(&std::fs::read_to_string(d.join("oracle.json")).unwrap())
                .unwrap(),
        })
        .collect()
}

fn loc(text: &str) -> usize {
    count_loc(&parse(text)).total()
}

/// Smallest verifying programs reachable by deleting any subset of the
/// initial candidates followed by dropping unreferenced declarations.
fn brute_force(case: &Case) -> (usize, BTreeSet<String>) {
    let delta = compute_delta(&case.original, &case.extended).unwrap();
    let cands = extract_candidates(&delta, &parse(&case.extended));
    assert!(
        !cands.is_empty() && cands.len() <= 12,
        "{}: {} candidates",
        case.name,
        cands.len()
    );
    let protected: BTreeSet<String> = parse(&case.original)
        .declarations
        .iter()
        .map(|d| d.name.clone())
        .collect();
    let mut by_loc: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for mask in 0u32..(1 << cands.len()) {
        let chosen: Vec<_> = (0..cands.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| cands[i].clone())
            .collect();
        let (text, _) = remove_unreferenced(&apply_removals(&case.extended, &chosen), &protected);
        if case.oracle.accepts(&text) {
            by_loc
                .entry(loc(&text))
                .or_default()
                .insert(normalize_for_cache(&text));
        }
    }
    by_loc
        .into_iter()
        .next()
        .expect("extended program verifies")
}

fn oracle_verifier(
    o: &Oracle,
) -> FnVerifier<impl Fn(&str, &VerifierConfig) -> VerificationOutcome + '_> {
    FnVerifier::new(move |t: &str, _: &VerifierConfig| {
        if o.accepts(t) {
            VerificationOutcome::success(1)
        } else {
            VerificationOutcome::failure(0, vec![])
        }
    })
}

#[tokio::test]
async fn greedy_matches_exhaustive_search() {
    let cases = corpus();
    assert!(cases.len() >= 5);
    for case in &cases {
        let (best_loc, best) = brute_force(case);
        let v = oracle_verifier(&case.oracle);
        let r = minimize(
            &case.original,
            &case.extended,
            &v,
            &MinimizeOptions::default(),
        )
        .await
        .unwrap();
        assert_eq!(loc(&r.text), best_loc, "{}:\n{}", case.name, r.text);
        assert!(
            best.contains(&normalize_for_cache(&r.text)),
            "{}:\n{}",
            case.name,
            r.text
        );
    }
}

#[tokio::test]
async fn result_contains_original_and_shrinks_monotonically() {
    for case in corpus() {
        let v = oracle_verifier(&case.oracle);
        let start = Instant::now();
        let r = minimize(
            &case.original,
            &case.extended,
            &v,
            &MinimizeOptions::default(),
        )
        .await
        .unwrap();
        assert!(start.elapsed() < Duration::from_secs(10));
        assert!(
            compute_delta(&case.original, &r.text).is_ok(),
            "{}",
            case.name
        );
        assert!(case.oracle.accepts(&r.text));
        let mut prev = loc(&case.extended);
        for rem in &r.removals {
            assert_eq!(rem.loc_before, prev, "{}", case.name);
            if matches!(rem.kind, RemovalKind::Candidate(_)) {
                assert!(rem.loc_after < rem.loc_before, "{}: {rem:?}", case.name);
            }
            prev = rem.loc_after;
        }
        assert_eq!(prev, loc(&r.text), "{}", case.name);

        let again = minimize(&case.original, &r.text, &v, &MinimizeOptions::default())
            .await
            .unwrap();
        assert!(again.removals.is_empty(), "{}: not a fixpoint", case.name);
        assert_eq!(again.text, r.text);
    }
}

async fn run(c: &Case) -> annot_core::minimizer::MinimizeResult {
    minimize(
        &c.original,
        &c.extended,
        &oracle_verifier(&c.oracle),
        &MinimizeOptions::default(),
    )
    .await
    .unwrap()
}

#[tokio::test]
async fn expected_shapes() {
    let cases = corpus();
    let get = |n: &str| cases.iter().find(|c| c.name == n).unwrap();
    let r = run(get("assert_by_lemma")).await;
    assert!(!r.text.contains("Double"));
    assert!(!r.text.contains("assert"));
    let r = run(get("chained_asserts")).await;
    assert_eq!(
        normalize_for_cache(&r.text),
        normalize_for_cache(&get("chained_asserts").original)
    );
    let r = run(get("shared_predicate")).await;
    assert_eq!(r.text.matches("requires Pos(x)").count(), 1);
    assert!(r.text.contains("ghost predicate Pos"));
    let r = run(get("lemma_postcondition")).await;
    assert!(!r.text.contains("Succ"));
    assert!(r.text.contains("assert k > 0;"));
}

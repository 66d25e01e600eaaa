use annot_core::llm::prompt::{errors_in, program_in};
use annot_core::llm::{render_diagnostics, Gateway, ProviderConfig, ReplayProvider};
use annot_core::repair_loop::{AttemptKind, NegativeFailure, RunConfig, SolveResult, Solver};
use annot_core::strip_merge::{activate_negative_test, strip_text};
use annot_core::verifier::{
    fingerprint, Diagnostic, DiagnosticCategory, ErrorClass, MockRule, MockVerifier,
    VerificationOutcome,
};
use std::path::PathBuf;
use std::sync::Arc;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(data().join(rel)).unwrap()
}

fn golden(name: &str, actual: &str) {
    let path = data().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(
        actual, expected,
        "golden {name} differs; rerun with UPDATE_GOLDEN=1 to accept"
    );
}

fn diag(line: usize, col: usize, msg: &str) -> Diagnostic {
    Diagnostic::error(line, col, msg, DiagnosticCategory::Verification)
}

/// Candidate 1 lacks the witness invariant, candidate 2 has a loop
/// invariant that fails on entry; anything else verifies.
fn max_verifier() -> MockVerifier {
    MockVerifier::new(VerificationOutcome::success(4))
        .rule(
            MockRule::Contains("\n  assert m == 5;".into()),
            VerificationOutcome::failure(3, vec![diag(25, 9, "assertion might not hold")]),
        )
        .rule(
            MockRule::Contains("invariant 0 <= k <= a.Length".into()),
            VerificationOutcome::failure(
                3,
                vec![
                    diag(6, 4, "index out of range"),
                    diag(9, 14, "this loop invariant could not be proved on entry"),
                ],
            ),
        )
        .rule(
            MockRule::NotContains("invariant exists i".into()),
            VerificationOutcome::failure(
                3,
                vec![diag(
                    4,
                    10,
                    "a postcondition could not be proved on this return path (related location program.dfy(18,0): this is the postcondition that could not be proved)",
                )],
            ),
        )
}

fn solver(replay: &str, verifier: MockVerifier, cfg: RunConfig) -> Solver {
    let provider = Arc::new(ReplayProvider::load(data().join(replay)).unwrap());
    let g = Gateway::uniform(
        vec![ProviderConfig {
            cost_per_input_token: 1e-5,
            cost_per_output_token: 3e-5,
            ..ProviderConfig::named("primary", 1)
        }],
        provider,
    )
    .unwrap();
    Solver::new(cfg, Arc::new(g), Arc::new(verifier)).unwrap()
}

fn pretty(r: &SolveResult) -> String {
    serde_json::to_string_pretty(r).unwrap() + "\n"
}

#[tokio::test]
async fn fail_fail_succeed_solves_at_attempt_three() {
    let stripped = strip_text(&read("repair/max/manual.dfy"));
    let run = || {
        solver(
            "repair/max/fail_fail_succeed.jsonl",
            max_verifier(),
            RunConfig::default(),
        )
    };
    let r = run().run_repair(&stripped).await;

    assert!(r.solved);
    assert_eq!(r.attempts.len(), 3);
    let classes: Vec<_> = r.attempts.iter().map(|a| a.error_class).collect();
    assert_eq!(
        classes,
        [
            ErrorClass::PotentiallyIncorrect,
            ErrorClass::PotentiallyIncorrect,
            ErrorClass::Success
        ]
    );
    assert_eq!(r.attempts[0].kind, AttemptKind::Direct);
    assert_eq!(
        r.final_program.as_deref(),
        Some(read("repair/max/manual.dfy").as_str())
    );
    assert_eq!(r.negative_tests_passed, Some(true));

    let msgs = r.attempts[2].request.messages().unwrap();
    let expected_errors = render_diagnostics(&r.attempts[1].diagnostics, 100);
    assert_eq!(
        errors_in(&msgs[1].content),
        Some(expected_errors.trim_end())
    );
    assert!(expected_errors
        .contains("program.dfy(9,14): Error: this loop invariant could not be proved on entry"));
    assert_eq!(
        program_in(&msgs[1].content),
        Some(read("repair/max/cand2.dfy").as_str())
    );

    let again = run().run_repair(&stripped).await;
    assert_eq!(pretty(&again), pretty(&r));
    golden("repair_fail_fail_succeed.json", &pretty(&r));
}

#[tokio::test]
async fn cheating_candidate_reverts_to_previous_program() {
    let stripped = strip_text(&read("repair/max/manual.dfy"));
    let r = solver(
        "repair/max/cheating_reverts.jsonl",
        max_verifier(),
        RunConfig::default(),
    )
    .run_repair(&stripped)
    .await;

    assert!(r.solved);
    assert_eq!(r.attempts.len(), 3);
    let cheat = &r.attempts[1];
    assert_eq!(cheat.error_class, ErrorClass::PotentiallyIncorrect);
    assert_eq!(cheat.cheating_violations, 1);
    assert!(cheat.note.as_deref().unwrap().starts_with("cheating: "));
    assert_eq!(cheat.verify_elapsed_s, 0.0);

    let msgs = r.attempts[2].request.messages().unwrap();
    let cand1 = read("repair/max/cand1.dfy");
    assert_eq!(program_in(&msgs[1].content), Some(cand1.as_str()));
    let errors = errors_in(&msgs[1].content).unwrap();
    let attempt1 = render_diagnostics(&r.attempts[0].diagnostics, 100);
    assert!(errors.starts_with(&attempt1));
    assert!(errors
        .ends_with(": assumptions are not allowed: assume exists i :: 0 <= i < k && a[i] == m;"));
    assert!(!r.final_program.as_deref().unwrap().contains("assume"));
    golden("repair_cheating_reverts.json", &pretty(&r));
}

fn linear_search_verifier() -> MockVerifier {
    let weak = read("repair/linear_search/weak.dfy");
    let weak_marker_1 = activate_negative_test(&weak, 1).unwrap();
    let refuted = VerificationOutcome::failure(5, vec![diag(24, 9, "assertion might not hold")]);
    MockVerifier::new(VerificationOutcome::success(6))
        .rule(
            MockRule::Fingerprint(fingerprint(&weak_marker_1)),
            VerificationOutcome::success(6),
        )
        .rule(
            MockRule::Contains("\n  assert idx == 3; //@invalid".into()),
            refuted.clone(),
        )
        .rule(
            MockRule::Contains("\n  assert idx == 0; //@invalid".into()),
            refuted,
        )
}

#[tokio::test]
async fn offending_negative_marker_is_reported() {
    let stripped = strip_text(&read("repair/linear_search/manual.dfy"));
    let cfg = RunConfig {
        negative_retry: false,
        ..RunConfig::default()
    };
    let r = solver(
        "repair/linear_search/weak_then_correct.jsonl",
        linear_search_verifier(),
        cfg,
    )
    .run_repair(&stripped)
    .await;
    assert!(r.solved);
    assert_eq!(r.negative_tests_passed, Some(false));
    assert_eq!(
        r.negative_failures,
        [NegativeFailure {
            marker_index: 1,
            line: 24,
            text: "// assert idx == 3; //@invalid".into()
        }]
    );
    assert!(r.negative_retries.is_empty());

    let correct = read("repair/linear_search/manual.dfy");
    let s = solver(
        "repair/linear_search/weak_then_correct.jsonl",
        linear_search_verifier(),
        RunConfig::default(),
    );
    assert_eq!(s.check_negative_tests(&correct).await, (true, vec![]));
    assert_eq!(
        s.check_negative_tests(&stripped.replace("//@invalid", ""))
            .await,
        (true, vec![])
    );
}

#[tokio::test]
async fn negative_retry_recovers_the_correct_specification() {
    let stripped = strip_text(&read("repair/linear_search/manual.dfy"));
    let r = solver(
        "repair/linear_search/weak_then_correct.jsonl",
        linear_search_verifier(),
        RunConfig::default(),
    )
    .run_repair(&stripped)
    .await;
    assert!(r.solved);
    assert_eq!(r.attempts.len(), 1);
    assert_eq!(r.negative_retries.len(), 1);
    assert_eq!(r.negative_tests_passed, Some(true));
    assert_eq!(
        r.final_program.as_deref(),
        Some(read("repair/linear_search/manual.dfy").as_str())
    );
    let msgs = r.negative_retries[0].request.messages().unwrap();
    assert_eq!(
        errors_in(&msgs[1].content),
        Some("program.dfy(24,0): Error: negative test verified but must be rejected: // assert idx == 3; //@invalid")
    );
}

/// The smoke fixtures wire through solve and minimize; a permissive mock
/// stands in for the verifier.
#[tokio::test]
async fn smoke_fixtures_carry_their_planted_helpers() {
    let manifest: serde_json::Value = serde_json::from_str(&read("e2e/manifest.json")).unwrap();
    let s = solver(
        "e2e/replay.jsonl",
        MockVerifier::new(VerificationOutcome::success(3)),
        RunConfig::default(),
    );
    let programs = manifest["programs"].as_array().unwrap();
    assert_eq!(programs.len(), 3);
    for p in programs {
        let stripped = strip_text(&read(&format!("e2e/{}", p["file"].as_str().unwrap())));
        let r = s.run_repair(&stripped).await;
        assert!(r.solved && r.attempts.len() == 1, "{}", p["id"]);
        let program = r.final_program.unwrap();
        let m = annot_core::minimizer::minimize(
            &stripped,
            &program,
            &MockVerifier::new(VerificationOutcome::success(3)),
            &Default::default(),
        )
        .await
        .unwrap();
        for planted in p["planted"].as_array().unwrap() {
            let planted = planted.as_str().unwrap();
            assert!(program.contains(planted), "{}: {planted}", p["id"]);
            assert!(!m.text.contains(planted), "{}: {planted}", p["id"]);
        }
    }
}

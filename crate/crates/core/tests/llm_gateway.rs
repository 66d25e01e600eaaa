use annot_core::llm::prompt::{errors_in, program_in};
use annot_core::llm::{
    arbitrate, render_direct_prompt, render_repair_prompt, Gateway, GenerationRequest,
    GenerationResult, HttpProvider, Provider, ProviderConfig, ProviderKind,
};
use annot_core::strip_merge::strip_text;
use annot_core::verifier::{VerificationOutcome, VerificationStatus};
use axum::{extract::State, http::HeaderMap, routing::post, Json, Router};
use proptest::prelude::*;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn golden(name: &str, actual: &str) {
    let path = data().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(
        actual, expected,
        "golden {name} differs; rerun with UPDATE_GOLDEN=1 to accept"
    );
}

#[test]
fn binary_search_direct_prompt_golden() {
    let manual = std::fs::read_to_string(data().join("sample/programs/BinarySearch.dfy")).unwrap();
    let stripped = strip_text(&manual);
    let msgs = render_direct_prompt(&stripped);
    let rendered = serde_json::to_string_pretty(&msgs).unwrap() + "\n";
    golden("direct_prompt_BinarySearch.json", &rendered);
    assert_eq!(program_in(&msgs[1].content), Some(stripped.as_str()));
}

fn result(provider: &str, priority: u32, program: Option<&str>) -> GenerationResult {
    GenerationResult {
        provider: provider.into(),
        priority,
        prompt: "direct@v1".into(),
        raw_text: program.unwrap_or("no code").into(),
        extracted_program: program.map(str::to_string),
        input_tokens: 0,
        output_tokens: 0,
        cost: 0.0,
        latency_s: 0.0,
    }
}

fn outcome(status: VerificationStatus, elapsed: f64) -> VerificationOutcome {
    VerificationOutcome {
        status,
        elapsed_s: elapsed,
        ..VerificationOutcome::success(0)
    }
}

fn program_with_lines(n: usize) -> String {
    let mut s = String::from("method M() {\n");
    for i in 0..n {
        s.push_str(&format!("  var x{i} := {i};\n"));
    }
    s.push_str("}\n");
    s
}

#[test]
fn arbitration_examples() {
    use VerificationStatus::*;
    let p = program_with_lines(3);
    let cases = [
        (result("a", 1, Some(&p)), outcome(SyntaxError, 1.0)),
        (result("b", 2, Some(&p)), outcome(Success, 9.0)),
    ];
    assert_eq!(arbitrate(&cases), Some(1));

    let forty = program_with_lines(38);
    let fifty = program_with_lines(48);
    let cases = [
        (result("a", 1, Some(&fifty)), outcome(Success, 1.0)),
        (result("b", 2, Some(&forty)), outcome(Success, 1.0)),
    ];
    assert_eq!(arbitrate(&cases), Some(1));

    let cases = [
        (result("late", 7, Some(&p)), outcome(Success, 2.0)),
        (result("early", 3, Some(&p)), outcome(Success, 2.0)),
    ];
    assert_eq!(arbitrate(&cases), Some(1));

    let cases = [
        (result("a", 1, None), outcome(VerificationFailure, 0.0)),
        (result("b", 2, Some(&p)), outcome(VerificationFailure, 5.0)),
    ];
    assert_eq!(arbitrate(&cases), Some(1));
    assert_eq!(arbitrate(&[]), None);
}

fn arb_candidate() -> impl Strategy<Value = (Option<usize>, u8, u8, u32)> {
    (
        proptest::option::weighted(0.8, 0usize..6),
        0u8..4,
        0u8..3,
        0u32..1000,
    )
}

proptest! {
    #[test]
    fn arbitration_ignores_input_order(
        cands in proptest::collection::vec(arb_candidate(), 1..7),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let statuses = [
            VerificationStatus::Success,
            VerificationStatus::SyntaxError,
            VerificationStatus::VerificationFailure,
            VerificationStatus::Timeout,
        ];
        let items: Vec<(GenerationResult, VerificationOutcome)> = cands
            .iter()
            .enumerate()
            .map(|(i, (lines, st, el, _))| {
                let prog = lines.map(program_with_lines);
                (
                    result(&format!("p{i}"), i as u32, prog.as_deref()),
                    outcome(statuses[*st as usize], *el as f64),
                )
            })
            .collect();
        let winner = &items[arbitrate(&items).unwrap()].0.provider;
        let mut shuffled = items.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&shuffled[arbitrate(&shuffled).unwrap()].0.provider, winner);
    }

    #[test]
    fn rendered_prompts_embed_program_verbatim(program in "[ -~\n]{0,200}", errs in "[a-z]{1,20}") {
        prop_assume!(!program.contains("DAFNY") && !program.contains("VERIFICATION ERRORS"));
        let d = render_direct_prompt(&program);
        prop_assert_eq!(program_in(&d[1].content), Some(program.as_str()));
        let r = render_repair_prompt(&program, &errs).unwrap();
        prop_assert_eq!(program_in(&r[1].content), Some(program.as_str()));
        prop_assert_eq!(errors_in(&r[1].content), Some(errs.as_str()));
    }
}

#[derive(Clone, Default)]
struct Seen {
    bodies: Arc<Mutex<Vec<(String, Value, HeaderMap)>>>,
}

async fn spawn_server() -> (String, Seen) {
    let seen = Seen::default();
    async fn openai(
        State(s): State<Seen>,
        h: HeaderMap,
        Json(b): Json<Value>,
    ) -> axum::response::Response {
        use axum::response::IntoResponse;
        s.bodies
            .lock()
            .unwrap()
            .push(("openai".into(), b.clone(), h));
        if b["model"] == "busy" {
            return (axum::http::StatusCode::TOO_MANY_REQUESTS, "slow down").into_response();
        }
        Json(json!({
            "choices": [{"message": {"role": "assistant", "content": "BEGIN DAFNY\nmethod M() {}\nEND DAFNY"}}],
            "usage": {"prompt_tokens": 100, "completion_tokens": 50}
        }))
        .into_response()
    }
    async fn anthropic(State(s): State<Seen>, h: HeaderMap, Json(b): Json<Value>) -> Json<Value> {
        s.bodies.lock().unwrap().push(("anthropic".into(), b, h));
        Json(json!({
            "content": [{"type": "text", "text": "BEGIN DAFNY\nmethod A() {}\nEND DAFNY"}],
            "usage": {"input_tokens": 7, "output_tokens": 3}
        }))
    }
    let app = Router::new()
        .route("/v1/chat/completions", post(openai))
        .route("/v1/messages", post(anthropic))
        .with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), seen)
}

#[tokio::test]
async fn http_providers_against_local_server() {
    let (base, seen) = spawn_server().await;
    std::env::set_var("ANNOT_TEST_LOCAL_KEY", "sekret");
    let busy = ProviderConfig {
        model_id: "busy".into(),
        endpoint: Some(format!("{base}/v1/chat/completions")),
        api_key_env: Some("ANNOT_TEST_LOCAL_KEY".into()),
        ..ProviderConfig::named("busy", 1)
    };
    let openai = ProviderConfig {
        model_id: "gpt-test".into(),
        endpoint: Some(format!("{base}/v1/chat/completions")),
        api_key_env: Some("ANNOT_TEST_LOCAL_KEY".into()),
        cost_per_input_token: 1e-3,
        cost_per_output_token: 2e-3,
        ..ProviderConfig::named("openai", 2)
    };
    let g = Gateway::uniform(vec![busy, openai], Arc::new(HttpProvider::new())).unwrap();
    let r = g
        .call_with_failover(&GenerationRequest::direct("method M() {}"))
        .await
        .unwrap();
    assert_eq!(r.provider, "openai");
    assert_eq!(r.extracted_program.as_deref(), Some("method M() {}"));
    assert!((r.cost - 0.2).abs() < 1e-12);
    assert_eq!(g.ledger().len(), 2);
    assert!((g.ledger().total_cost() - 0.2).abs() < 1e-12);

    let claude = ProviderConfig {
        kind: ProviderKind::Anthropic,
        model_id: "claude-test".into(),
        endpoint: Some(format!("{base}/v1/messages")),
        api_key_env: Some("ANNOT_TEST_LOCAL_KEY".into()),
        ..ProviderConfig::named("anthropic", 1)
    };
    let c = HttpProvider::new()
        .complete(&claude, &render_direct_prompt("method A() {}"))
        .await
        .unwrap();
    assert_eq!((c.input_tokens, c.output_tokens), (7, 3));

    let seen = seen.bodies.lock().unwrap();
    let (_, body, headers) = &seen[1];
    assert_eq!(headers["authorization"], "Bearer sekret");
    assert_eq!(body["messages"][0]["role"], "system");
    let (_, body, headers) = &seen[2];
    assert_eq!(headers["x-api-key"], "sekret");
    assert!(headers.contains_key("anthropic-version"));
    assert!(body["system"]
        .as_str()
        .unwrap()
        .starts_with("You are an expert in the Dafny"));
}

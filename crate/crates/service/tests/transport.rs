mod common;

use common::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

use annot_service::protocol::{Request, Status, METHODS};
use annot_service::{http, stdio, JobState, Response, PROTOCOL_SCHEMA};

async fn spawn_http() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let svc = service(replay_config(), bench_verifier());
    tokio::spawn(async move { axum::serve(listener, http::router(svc)).await.unwrap() });
    format!("http://{addr}")
}

async fn rpc(base: &str, body: Value) -> Response {
    reqwest::Client::new()
        .post(format!("{base}/rpc"))
        .json(&body)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

#[tokio::test]
async fn envelope_round_trip_over_http() {
    let base = spawn_http().await;
    let r = rpc(
        &base,
        json!({"version": 1, "id": "a", "method": "submit",
               "params": {"kind": "generate", "program_text": sample("SumArray")}}),
    )
    .await;
    assert_eq!((r.id.clone(), r.status), (json!("a"), Status::Ok));
    let job = r.payload["job_id"].as_str().unwrap().to_string();

    let mut since = 0;
    let mut states = Vec::new();
    loop {
        let r = rpc(
            &base,
            json!({"version": 1, "id": 7, "method": "events",
                   "params": {"job_id": job, "since": since, "wait_ms": 500}}),
        )
        .await;
        assert_eq!(r.status, Status::Ok);
        for e in r.payload["events"].as_array().unwrap() {
            let o = e["ordinal"].as_u64().unwrap();
            assert_eq!(o, since + 1);
            since = o;
            states.push(e["state"].as_str().unwrap().to_string());
        }
        if r.payload["state"] == "done" {
            assert_eq!(r.payload["result"]["solved"], true);
            break;
        }
    }
    assert_eq!(states.first().map(String::as_str), Some("queued"));
    assert_eq!(states.last().map(String::as_str), Some("done"));

    let r = rpc(&base, json!({"version": 1, "id": 8, "method": "jobs"})).await;
    assert_eq!(r.payload[0]["state"], "done");
    let r = rpc(
        &base,
        json!({"version": 1, "id": 9, "method": "config", "params": {"set": {"retry_limit": 5}}}),
    )
    .await;
    assert_eq!(r.payload["retry_limit"], 5);
}

#[tokio::test]
async fn envelope_errors_over_http() {
    let base = spawn_http().await;
    let cases = [
        (
            json!({"version": 2, "id": 1, "method": "jobs"}),
            "unsupported_version",
        ),
        (
            json!({"version": 1, "id": 2, "method": "prove"}),
            "unknown_method",
        ),
        (
            json!({"version": 1, "id": 3, "method": "events", "params": {"job_id": "x"}}),
            "unknown_job",
        ),
        (
            json!({"version": 1, "id": 4, "method": "submit", "params": {"kind": "generate", "program_text": ""}}),
            "bad_request",
        ),
        (
            json!({"version": 1, "id": 5, "method": "submit", "params": {"kind": "lint", "program_text": "x"}}),
            "bad_request",
        ),
        (
            json!({"version": 1, "id": 6, "method": "best_effort", "params": {"attempts": []}}),
            "bad_request",
        ),
    ];
    for (req, code) in cases {
        let r = rpc(&base, req.clone()).await;
        assert_eq!(r.status, Status::Error, "{req}");
        assert_eq!(r.id, req["id"]);
        assert_eq!(r.payload["code"], code, "{req}");
    }
    let r: Response = reqwest::Client::new()
        .post(format!("{base}/rpc"))
        .body("{not json")
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!((r.id, r.status), (Value::Null, Status::Error));
}

#[tokio::test]
async fn resource_routes_share_the_methods() {
    let base = spawn_http().await;
    let c = reqwest::Client::new();
    let health: Value = c
        .get(format!("{base}/v1/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health, json!({"status": "ok", "version": 1}));

    let resp = c
        .post(format!("{base}/v1/jobs"))
        .json(&json!({"kind": "generate", "program_text": ""}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 400);
    let resp = c
        .get(format!("{base}/v1/jobs/none/events"))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 404);

    let sub: Value = c
        .post(format!("{base}/v1/jobs"))
        .json(&json!({"kind": "generate", "program_text": sample("AddArrays")}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let job = sub["job_id"].as_str().unwrap();
    let mut state = Value::Null;
    for _ in 0..100 {
        let ev: Value = c
            .get(format!("{base}/v1/jobs/{job}/events?since=0&wait_ms=200"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        state = ev["state"].clone();
        if state == "done" {
            break;
        }
    }
    assert_eq!(state, "done");
    let cancel: Value = c
        .post(format!("{base}/v1/jobs/{job}/cancel"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(cancel["state"], "done");
    let cfg: Value = c
        .get(format!("{base}/v1/config"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(cfg["retry_limit"], 3);
    let best: Value = c
        .post(format!("{base}/v1/best-effort"))
        .json(&json!({"attempts": [
            {"program": "a", "outcome": {"status": "VerificationFailure", "diagnostics": [], "elapsed_s": 1.0,
                                         "obligations_verified": 5, "obligations_failed": 2}},
            {"program": "b", "outcome": {"status": "VerificationFailure", "diagnostics": [], "elapsed_s": 1.0,
                                         "obligations_verified": 7, "obligations_failed": 3}}]}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(best["program"], "b");
}

#[tokio::test]
async fn line_transport_answers_every_request_by_id() {
    let svc = service(replay_config(), bench_verifier());
    let (client, server) = tokio::io::duplex(1 << 16);
    let (server_read, server_write) = tokio::io::split(server);
    let serve = tokio::spawn(stdio::serve_lines(
        svc,
        BufReader::new(server_read),
        server_write,
    ));
    let (client_read, mut client_write) = tokio::io::split(client);
    let mut lines = BufReader::new(client_read).lines();

    let submit = Request::new(
        1,
        "submit",
        json!({"kind": "generate", "program_text": sample("Reverse")}),
    );
    let mut input = serde_json::to_string(&submit).unwrap() + "\n\n";
    input.push_str("garbage\n");
    input.push_str(&serde_json::to_string(&Request::new("j", "jobs", Value::Null)).unwrap());
    input.push('\n');
    client_write.write_all(input.as_bytes()).await.unwrap();

    let mut got: BTreeMap<String, Response> = BTreeMap::new();
    for _ in 0..3 {
        let r: Response = serde_json::from_str(&lines.next_line().await.unwrap().unwrap()).unwrap();
        got.insert(r.id.to_string(), r);
    }
    assert_eq!(got["1"].status, Status::Ok);
    assert_eq!(got["null"].payload["code"], "bad_request");
    assert_eq!(got["\"j\""].status, Status::Ok);
    let job = got["1"].payload["job_id"].as_str().unwrap().to_string();

    let mut state = JobState::Queued;
    for i in 0..200 {
        let req = Request::new(100 + i, "events", json!({"job_id": job, "wait_ms": 100}));
        client_write
            .write_all((serde_json::to_string(&req).unwrap() + "\n").as_bytes())
            .await
            .unwrap();
        let r: Response = serde_json::from_str(&lines.next_line().await.unwrap().unwrap()).unwrap();
        assert_eq!(r.id, json!(100 + i));
        state = serde_json::from_value(r.payload["state"].clone()).unwrap();
        if state.is_terminal() {
            break;
        }
    }
    assert_eq!(state, JobState::Done);
    client_write.shutdown().await.unwrap();
    drop(client_write);
    serve.await.unwrap().unwrap();
}

#[test]
fn schema_documents_the_implemented_protocol() {
    let schema: Value = serde_json::from_str(PROTOCOL_SCHEMA).unwrap();
    let defs = &schema["$defs"];
    let strings = |v: &Value| -> Vec<String> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(
        strings(&defs["request"]["properties"]["method"]["enum"]),
        METHODS
    );
    let states = [
        JobState::Queued,
        JobState::Running,
        JobState::Done,
        JobState::Failed,
        JobState::Cancelled,
    ]
    .map(|s| {
        serde_json::to_value(s)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string()
    });
    assert_eq!(strings(&defs["job_state"]["enum"]), states);
    use annot_service::ServiceError::*;
    let codes: Vec<String> = [
        BadRequest(String::new()),
        UnknownJob(String::new()),
        UnknownMethod(String::new()),
        UnsupportedVersion(0),
        Internal(String::new()),
    ]
    .iter()
    .map(|e| e.code().to_string())
    .collect();
    assert_eq!(strings(&defs["error"]["properties"]["code"]["enum"]), codes);
    assert_eq!(
        defs["request"]["properties"]["version"]["const"],
        annot_service::PROTOCOL_VERSION
    );
    for ex in schema["examples"].as_array().unwrap() {
        if ex.get("method").is_some() {
            let r: Request = serde_json::from_value(ex.clone()).unwrap();
            assert!(METHODS.contains(&r.method.as_str()));
        } else {
            serde_json::from_value::<Response>(ex.clone()).unwrap();
        }
    }
}

//! Build a run with the CLI entry point, then drive the review API in
//! process: list pending patterns, post an expert verdict, submit it again
//! and read the agreement report back.
//!
//!     cargo run --release -p gazelens-app --example review_api

use axum::body::Body;
use axum::http::Request;
use gazelens_app::cli;
use gazelens_app::service::{router, AppState};
use gazelens_app::store::Store;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (u16, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .expect("request");
    let response = app.clone().oneshot(request).await.expect("response");
    let status = response.status().as_u16();
    let bytes = response.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = |p: &str| dir.path().join(p).to_string_lossy().into_owned();
    let (data, panel, store) = (path("data"), path("panel"), path("store"));
    let config = format!("{data}/gazelens.toml");
    assert_eq!(cli::run(["gazelens", "synth", "data", "--out", &data]), 0);

    let global = ["--config", config.as_str(), "--store", store.as_str(), "--run-id", "demo"];
    let evidence = format!("{panel}/evidence.jsonl");
    let stages: [&[&str]; 5] = [
        &["ingest"],
        &["segment"],
        &["mine"],
        &["synth", "panel", "--out", &panel],
        &["score", "--evidence", &evidence],
    ];
    for args in stages {
        let argv: Vec<&str> = ["gazelens"].into_iter().chain(args.iter().copied()).chain(global).collect();
        assert_eq!(cli::run(argv), 0, "stage {args:?}");
    }

    let app = router(AppState::new(Store::new(&store)), None);
    let (_, runs) = call(&app, "GET", "/runs", None).await;
    println!("runs: {runs}");

    let (_, pending) = call(&app, "GET", "/runs/demo/patterns?status=pending", None).await;
    let items = pending.as_array().cloned().unwrap_or_default();
    println!("{} patterns awaiting review", items.len());
    let Some(first) = items.first() else { return };
    let pid = first["pattern"]["id"].as_str().expect("pattern id");
    println!("reviewing {pid}: {}", first["pattern"]["text"]);

    let verdict = json!({"run_id": "demo", "verdict": "valid", "note": "matches the fixation data"});
    let uri = format!("/patterns/{pid}/verdict");
    let (status, body) = call(&app, "POST", &uri, Some(verdict.clone())).await;
    println!("POST -> {status} {}", body["outcome"]["outcome"]);
    let (status, body) = call(&app, "POST", &uri, Some(verdict)).await;
    println!("POST again -> {status} {}", body["outcome"]["outcome"]);

    let (_, kappa) = call(&app, "GET", "/runs/demo/reports/kappa", None).await;
    println!("kappa report: paired {} expert verdicts {}", kappa["paired"], kappa["expert_verdicts"]);
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gazelens_app::service::{router, AppState};
use gazelens_app::store::Store;
use http_body_util::BodyExt;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const RUN: &str = "r1";

/// A synthetic data directory and an empty run store in one temp dir.
pub struct Fixture {
    pub dir: TempDir,
}

impl Fixture {
    pub fn new() -> Fixture {
        let fx = Fixture { dir: tempfile::tempdir().expect("tempdir") };
        let out = fx.gazelens(&["synth", "data", "--out", fx.data().to_str().unwrap()]);
        assert_success(&out);
        fx
    }

    /// A fixture whose run `r1` has been ingested, segmented and mined.
    pub fn mined() -> Fixture {
        let fx = Fixture::new();
        for stage in ["ingest", "segment", "mine"] {
            assert_success(&fx.stage(&[stage]));
        }
        fx
    }

    /// A mined fixture with literature scores and synthetic panel files.
    pub fn scored() -> Fixture {
        let fx = Fixture::mined();
        assert_success(&fx.stage(&["synth", "panel", "--out", fx.panel().to_str().unwrap()]));
        assert_success(&fx.stage(&["score", "--evidence", fx.panel().join("evidence.jsonl").to_str().unwrap()]));
        fx
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn data(&self) -> PathBuf {
        self.root().join("data")
    }

    pub fn panel(&self) -> PathBuf {
        self.root().join("panel")
    }

    pub fn config(&self) -> PathBuf {
        self.data().join("gazelens.toml")
    }

    pub fn store_dir(&self) -> PathBuf {
        self.root().join("store")
    }

    pub fn store(&self) -> Store {
        Store::new(self.store_dir())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.store_dir().join("runs").join(RUN)
    }

    /// Runs the binary with no implicit flags.
    pub fn gazelens(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_gazelens"))
            .args(args)
            .current_dir(self.root())
            .env("RUST_LOG", "error")
            .output()
            .expect("binary runs")
    }

    /// Runs a command against run `r1` of this fixture's store and config.
    pub fn stage(&self, args: &[&str]) -> Output {
        let config = self.config();
        let store = self.store_dir();
        let mut all = vec!["--config", config.to_str().unwrap(), "--store", store.to_str().unwrap(), "--run-id", RUN];
        all.extend_from_slice(args);
        self.gazelens(&all)
    }

    pub fn router(&self) -> Router {
        router(AppState::new(self.store()), None)
    }
}

pub fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Sends one request through the router and decodes the JSON answer.
pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let raw = body.map(|b| b.to_string());
    call_raw(app, method, uri, raw).await
}

pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).expect("request");
    let resp = app.clone().oneshot(req).await.expect("router answers");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("json body") };
    (status, value)
}

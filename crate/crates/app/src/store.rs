//! The on-disk run store.
//!
//! ```text
//! <store>/runs/<run-id>/
//!     manifest.json
//!     data/clean.csv, data/schema.json, data/clean_report.json
//!     segments/horizontal.jsonl, segments/vertical.jsonl
//!     patterns/<stage>_<level>_<model>.jsonl      deduplicated per model
//!     patterns/raw/*.jsonl, patterns/merged/*.jsonl
//!     composite.jsonl, evidence.jsonl, verdicts.jsonl
//!     model/lstm.json
//!     logs/gateway.jsonl
//!     reports/*
//! ```
//!
//! Every file is replaced through a temporary file and a rename, so a reader
//! always sees either the old or the new content.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use gazelens::co_eval::{ReviewVerdict, SubmitOutcome, VerdictLog};
use gazelens::digest::short_digest;
use gazelens::jsonl::{from_jsonl, to_jsonl, JsonlError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const CLEAN_CSV: &str = "data/clean.csv";
pub const SCHEMA: &str = "data/schema.json";
pub const CLEAN_REPORT: &str = "data/clean_report.json";
pub const HORIZONTAL: &str = "segments/horizontal.jsonl";
pub const VERTICAL: &str = "segments/vertical.jsonl";
pub const PATTERNS_DIR: &str = "patterns";
pub const RAW_PATTERNS_DIR: &str = "patterns/raw";
pub const MERGED_PATTERNS_DIR: &str = "patterns/merged";
pub const COMPOSITE: &str = "composite.jsonl";
pub const EVIDENCE: &str = "evidence.jsonl";
pub const VERDICTS: &str = "verdicts.jsonl";
pub const MODEL: &str = "model/lstm.json";
pub const GATEWAY_LOG: &str = "logs/gateway.jsonl";
pub const MINING_FAILURES: &str = "reports/mining_failures.json";
pub const SCORES: &str = "reports/scores.jsonl";
pub const KAPPA: &str = "reports/kappa.json";
pub const CONSISTENCY: &str = "reports/consistency.tsv";
pub const ANOMALIES: &str = "reports/anomalies.json";
pub const ANOMALY_PROMPT: &str = "reports/anomaly_prompt.txt";
pub const DIFFICULTY: &str = "reports/difficulty.json";
pub const DIFFICULTY_TSV: &str = "reports/difficulty.tsv";
pub const DIFFICULTY_RUNS: &str = "reports/difficulty_runs.jsonl";
pub const QUESTIONS: &str = "reports/questions.json";
pub const SUMMARY: &str = "reports/summary.md";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run {0} not found")]
    RunNotFound(String),
    #[error("no runs in the store; start one with `gazelens ingest`")]
    NoRuns,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line} (byte {offset}): {message}", path.display())]
    Corrupt { path: PathBuf, line: usize, offset: usize, message: String },
    #[error("invalid run id {0:?}")]
    InvalidRunId(String),
}

impl From<JsonlError> for StoreError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io { path, source } => StoreError::Io { path, source },
            JsonlError::Parse { path, line, offset, message } => StoreError::Corrupt { path, line, offset, message },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Ingest,
    Segment,
    Mine,
    Score,
    Kappa,
    Detect,
    PredictDifficulty,
    Report,
}

impl StageName {
    pub const ALL: [StageName; 8] = [
        StageName::Ingest,
        StageName::Segment,
        StageName::Mine,
        StageName::Score,
        StageName::Kappa,
        StageName::Detect,
        StageName::PredictDifficulty,
        StageName::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Ingest => "ingest",
            StageName::Segment => "segment",
            StageName::Mine => "mine",
            StageName::Score => "score",
            StageName::Kappa => "kappa",
            StageName::Detect => "detect",
            StageName::PredictDifficulty => "predict-difficulty",
            StageName::Report => "report",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEvent {
    pub stage: StageName,
    pub status: StageStatus,
    pub at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub created_at: String,
    /// Effective configuration when the run was created.
    pub config: serde_json::Value,
    /// Every status change, oldest first.
    pub history: Vec<StatusEvent>,
    /// Artifact name to path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn status(&self, stage: StageName) -> StageStatus {
        self.history.iter().rev().find(|e| e.stage == stage).map_or(StageStatus::Pending, |e| e.status)
    }

    pub fn statuses(&self) -> BTreeMap<StageName, StageStatus> {
        StageName::ALL.iter().map(|s| (*s, self.status(*s))).collect()
    }
}

/// Current time as RFC 3339 with milliseconds.
pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn now_millis() -> u64 {
    chrono::Utc::now().timestamp_millis().max(0) as u64
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io = |source| StoreError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = path.with_file_name(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Byte offset of a 1-based line and column in `text`.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum::<usize>() + column.saturating_sub(1)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    write_atomic(path, text.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
    Ok(from_jsonl(&text, path)?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    write_atomic(path, to_jsonl(items).as_bytes())
}

/// A directory of runs.
#[derive(Debug, Clone)]
pub struct Store {
    pub root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    fn check_id(id: &str) -> Result<(), StoreError> {
        let ok = !id.is_empty()
            && id != "."
            && id != ".."
            && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if ok {
            Ok(())
        } else {
            Err(StoreError::InvalidRunId(id.to_string()))
        }
    }

    /// `<utc timestamp>-s<seed>-<config digest>`.
    pub fn new_run_id(seed: u64, config: &serde_json::Value) -> String {
        format!(
            "{}-s{seed}-{}",
            chrono::Utc::now().format("%Y%m%dT%H%M%S"),
            short_digest(config.to_string())
        )
    }

    /// Creates a run directory and its manifest. Without an explicit id a
    /// fresh one is generated; a clash within the same second gets a suffix.
    pub fn create_run(&self, run_id: Option<&str>, seed: u64, config: serde_json::Value) -> Result<Run, StoreError> {
        let runs = self.runs_dir();
        std::fs::create_dir_all(&runs).map_err(|source| StoreError::Io { path: runs.clone(), source })?;
        let base = match run_id {
            Some(id) => id.to_string(),
            None => Store::new_run_id(seed, &config),
        };
        Store::check_id(&base)?;
        let mut id = base.clone();
        let mut n = 1;
        loop {
            let dir = runs.join(&id);
            match std::fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && run_id.is_none() => {
                    n += 1;
                    id = format!("{base}-{n}");
                }
                Err(source) => return Err(StoreError::Io { path: dir, source }),
            }
        }
        let run = Run { id: id.clone(), dir: runs.join(&id) };
        let manifest = RunManifest {
            run_id: id,
            seed,
            created_at: now_rfc3339(),
            config,
            history: Vec::new(),
            artifacts: BTreeMap::new(),
        };
        write_json(&run.path(MANIFEST), &manifest)?;
        Ok(run)
    }

    pub fn open(&self, run_id: &str) -> Result<Run, StoreError> {
        Store::check_id(run_id).map_err(|_| StoreError::RunNotFound(run_id.to_string()))?;
        let dir = self.runs_dir().join(run_id);
        if !dir.join(MANIFEST).is_file() {
            return Err(StoreError::RunNotFound(run_id.to_string()));
        }
        Ok(Run { id: run_id.to_string(), dir })
    }

    /// Manifests of every run, oldest first.
    pub fn list(&self) -> Result<Vec<RunManifest>, StoreError> {
        let runs = self.runs_dir();
        let Ok(entries) = std::fs::read_dir(&runs) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for entry in entries.flatten() {
            let path = entry.path().join(MANIFEST);
            if path.is_file() {
                out.push(read_json::<RunManifest>(&path)?);
            }
        }
        out.sort_by(|a, b| (&a.created_at, &a.run_id).cmp(&(&b.created_at, &b.run_id)));
        Ok(out)
    }

    pub fn latest(&self) -> Result<Run, StoreError> {
        let last = self.list()?.pop().ok_or(StoreError::NoRuns)?;
        self.open(&last.run_id)
    }
}

/// One run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub id: String,
    pub dir: PathBuf,
}

impl Run {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }

    pub fn manifest(&self) -> Result<RunManifest, StoreError> {
        read_json(&self.path(MANIFEST))
    }

    pub fn update_manifest(&self, f: impl FnOnce(&mut RunManifest)) -> Result<RunManifest, StoreError> {
        let mut m = self.manifest()?;
        f(&mut m);
        write_json(&self.path(MANIFEST), &m)?;
        Ok(m)
    }

    /// Appends a status event.
    pub fn record(&self, stage: StageName, status: StageStatus, message: Option<String>) -> Result<(), StoreError> {
        self.update_manifest(|m| m.history.push(StatusEvent { stage, status, at: now_rfc3339(), message }))?;
        Ok(())
    }

    pub fn register(&self, artifacts: &[(&str, &str)]) -> Result<(), StoreError> {
        self.update_manifest(|m| {
            for (name, rel) in artifacts {
                m.artifacts.insert(name.to_string(), rel.to_string());
            }
        })?;
        Ok(())
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<(), StoreError> {
        write_atomic(&self.path(rel), text.as_bytes())
    }

    pub fn read_text(&self, rel: &str) -> Result<String, StoreError> {
        let path = self.path(rel);
        std::fs::read_to_string(&path).map_err(|source| StoreError::Io { path, source })
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), StoreError> {
        write_json(&self.path(rel), value)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T, StoreError> {
        read_json(&self.path(rel))
    }

    pub fn write_jsonl<T: Serialize>(&self, rel: &str, items: &[T]) -> Result<(), StoreError> {
        write_jsonl(&self.path(rel), items)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, rel: &str) -> Result<Vec<T>, StoreError> {
        read_jsonl(&self.path(rel))
    }

    /// Every verdict recorded for the run; empty when none exist yet.
    pub fn verdict_log(&self) -> Result<VerdictLog, StoreError> {
        if !self.exists(VERDICTS) {
            return Ok(VerdictLog::default());
        }
        Ok(VerdictLog::new(self.read_jsonl(VERDICTS)?))
    }

    /// Submits verdicts in order and rewrites the log when anything changed.
    /// Callers serialize writes to one run.
    pub fn submit_verdicts(&self, verdicts: Vec<ReviewVerdict>) -> Result<Vec<SubmitOutcome>, StoreError> {
        let mut log = self.verdict_log()?;
        let before = log.entries.len();
        let outcomes: Vec<SubmitOutcome> = verdicts.into_iter().map(|v| log.submit(v)).collect();
        if log.entries.len() != before || !self.exists(VERDICTS) {
            self.write_jsonl(VERDICTS, &log.entries)?;
        }
        Ok(outcomes)
    }
}

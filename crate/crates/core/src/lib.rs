//! Human-AI collaborative analysis of eye-tracking data.
//!
//! The crate is organized along the analysis workflow:
//!
//! - [`gaze_data`]: ingest, clean, AOI-annotate and sessionize gaze exports.
//! - [`segmentation`]: horizontal (row) and vertical (id/column pair) payloads
//!   serialized into prompt bundles.
//! - [`llm_gateway`]: provider-agnostic completion calls with retries, a
//!   deterministic mock provider and pattern parsing.
//! - [`pattern_miner`]: the stage × prompt level × model mining grid,
//!   deduplication, frequency classification and composite sampling.
//! - [`co_eval`]: literature-evidence scoring, Cohen's kappa and trust grids.
//! - [`anomaly_lstm`]: an LSTM autoencoder trained on expert gaze windows,
//!   reconstruction-error anomaly detection and AOI-binned reports.
//! - [`difficulty`]: the question-difficulty prediction harness.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod anomaly_lstm;
pub mod co_eval;
pub mod difficulty;
pub mod digest;
pub mod gaze_data;
pub mod grid;
pub mod jsonl;
pub mod llm_gateway;
pub mod pattern_miner;
pub mod segmentation;
pub mod synthetic;
pub mod templates;

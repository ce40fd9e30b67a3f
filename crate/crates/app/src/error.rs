use gazelens::anomaly_lstm::AnomalyError;
use gazelens::co_eval::CoEvalError;
use gazelens::difficulty::DifficultyError;
use gazelens::gaze_data::GazeDataError;
use gazelens::jsonl::JsonlError;
use gazelens::llm_gateway::GatewayError;
use gazelens::pattern_miner::MinerError;
use gazelens::segmentation::SegmentationError;

use crate::store::StoreError;

/// Exit status of a failed command whose input artifact is missing.
pub const EXIT_PRECONDITION: i32 = 3;
/// Exit status of any other failure.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing {artifact}: {hint}")]
    Precondition { artifact: String, hint: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Gaze(#[from] GazeDataError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    CoEval(#[from] CoEvalError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Difficulty(#[from] DifficultyError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

impl AppError {
    pub fn precondition(artifact: impl Into<String>, hint: impl Into<String>) -> AppError {
        AppError::Precondition { artifact: artifact.into(), hint: hint.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Precondition { .. } => EXIT_PRECONDITION,
            AppError::Store(StoreError::NoRuns) => EXIT_PRECONDITION,
            _ => EXIT_FAILURE,
        }
    }
}

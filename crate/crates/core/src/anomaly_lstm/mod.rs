//! Anomaly detection on student gaze against an expert baseline.
//!
//! Expert sequences are cut into fixed-length windows, z-scored with expert
//! statistics and used to train an LSTM autoencoder. Student windows whose
//! reconstruction error exceeds `mean + k·std` of the expert training errors
//! are flagged and counted per student, question and AOI category.

mod lstm;
mod model_file;
mod report;

use serde::{Deserialize, Serialize};

use crate::gaze_data::{AoiCategory, Sequence, SequenceKey, FEATURE_NAMES};

pub use lstm::{
    gradient_check, relative_error, train, RELATIVE_ERROR_FLOOR, GradientCheck, Layout, LstmModel, TrainConfig, MODEL_FORMAT_VERSION,
};
#[doc(hidden)]
pub use lstm::{gradient_check_with_fault, GradientFault};
pub use model_file::{load_model, save_model, ModelFile};
pub use report::{
    detect, summarize_for_llm, AnomalyReport, AnomalySummary, BandRate, CountCell, DetectConfig, StudentAggregate,
    WindowScore,
};

pub const DEFAULT_WINDOW_LEN: usize = 32;
pub const DEFAULT_STRIDE: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum AnomalyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("feature {feature} has zero variance in the expert windows")]
    ZeroVariance { feature: String },
    #[error("window shape mismatch: expected rows of {expected} features, got {got} values")]
    Shape { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("no windows")]
    NoWindows,
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub participant_id: String,
    pub question_id: String,
    /// Index of the first record within its sequence.
    pub start: usize,
    /// `window_len` rows of `feature_dim` raw values.
    pub features: Vec<Vec<f64>>,
    pub aoi_majority: AoiCategory,
}

impl Window {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    /// Sequences shorter than the window length.
    pub short: Vec<SequenceKey>,
}

/// floor((len − window_len) / stride) + 1, or 0 for short sequences.
pub fn window_count(len: usize, window_len: usize, stride: usize) -> usize {
    if len < window_len || stride == 0 {
        0
    } else {
        (len - window_len) / stride + 1
    }
}

/// Modal AOI category of the labeled records. A tie goes to Error; a window
/// with no labels counts as NonError.
pub fn aoi_majority(labels: &[Option<AoiCategory>]) -> AoiCategory {
    let errors = labels.iter().filter(|a| **a == Some(AoiCategory::Error)).count();
    let others = labels.iter().filter(|a| **a == Some(AoiCategory::NonError)).count();
    if errors > 0 && errors >= others {
        AoiCategory::Error
    } else {
        AoiCategory::NonError
    }
}

/// Sliding windows over every sequence.
pub fn build_windows<'a>(
    sequences: impl IntoIterator<Item = &'a Sequence>,
    window_len: usize,
    stride: usize,
) -> Result<WindowSet, AnomalyError> {
    if window_len < 2 {
        return Err(AnomalyError::Config(format!("window length {window_len} is below 2")));
    }
    if stride == 0 {
        return Err(AnomalyError::Config("stride must be at least 1".into()));
    }
    let mut out = WindowSet::default();
    for seq in sequences {
        let n = window_count(seq.len(), window_len, stride);
        if n == 0 {
            log::warn!(
                "sequence {}/{} has {} records, fewer than the window length {window_len}",
                seq.key.participant_id,
                seq.key.question_id,
                seq.len()
            );
            out.short.push(seq.key.clone());
            continue;
        }
        for w in 0..n {
            let start = w * stride;
            let range = start..start + window_len;
            out.windows.push(Window {
                participant_id: seq.key.participant_id.clone(),
                question_id: seq.key.question_id.clone(),
                start,
                features: seq.features[range.clone()].iter().map(|f| f.to_vec()).collect(),
                aoi_majority: aoi_majority(&seq.aoi[range]),
            });
        }
    }
    Ok(out)
}

/// Per-feature z-scoring with statistics of the expert windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Normalizer {
        Normalizer {
            feature_names: (0..dim).map(|i| format!("f{i}")).collect(),
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mean and population std over every row of every window.
    pub fn fit(windows: &[Window]) -> Result<Normalizer, AnomalyError> {
        let first = windows.iter().find(|w| !w.is_empty()).ok_or(AnomalyError::NoWindows)?;
        let dim = first.features[0].len();
        let names: Vec<String> = if dim == FEATURE_NAMES.len() {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..dim).map(|i| format!("f{i}")).collect()
        };
        Normalizer::fit_named(windows, names)
    }

    pub fn fit_named(windows: &[Window], feature_names: Vec<String>) -> Result<Normalizer, AnomalyError> {
        let dim = feature_names.len();
        let mut sum = vec![0.0; dim];
        let mut count = 0usize;
        for row in windows.iter().flat_map(|w| &w.features) {
            if row.len() != dim {
                return Err(AnomalyError::Shape { expected: dim, got: row.len() });
            }
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(AnomalyError::NoWindows);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; dim];
        for row in windows.iter().flat_map(|w| &w.features) {
            for k in 0..dim {
                var[k] += (row[k] - mean[k]).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        if let Some(k) = (0..dim).position(|k| std[k].is_nan() || std[k] <= 1e-12 * mean[k].abs().max(1.0)) {
            return Err(AnomalyError::ZeroVariance { feature: feature_names[k].clone() });
        }
        Ok(Normalizer { feature_names, mean, std })
    }

    /// Row-major z-scores of a window. Values are not clipped.
    pub fn apply_flat(&self, window: &Window) -> Result<Vec<f64>, AnomalyError> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(window.len() * dim);
        for row in &window.features {
            if row.len() != dim {
                return Err(AnomalyError::Shape { expected: dim, got: row.len() });
            }
            out.extend(row.iter().enumerate().map(|(k, v)| (v - self.mean[k]) / self.std[k]));
        }
        Ok(out)
    }

    pub fn apply(&self, window: &Window) -> Result<Window, AnomalyError> {
        let flat = self.apply_flat(window)?;
        Ok(Window { features: flat.chunks(self.dim()).map(<[f64]>::to_vec).collect(), ..window.clone() })
    }
}

/// Anything that maps a flat `steps × input_dim` window to a reconstruction
/// of the same shape.
pub trait Reconstructor {
    fn input_dim(&self) -> usize;
    fn reconstruct(&self, x: &[f64]) -> Vec<f64>;
}

/// Mean squared difference between a normalized window and its
/// reconstruction.
pub fn reconstruction_error<R: Reconstructor + ?Sized>(model: &R, window: &Window) -> Result<f64, AnomalyError> {
    let dim = model.input_dim();
    let mut x = Vec::with_capacity(window.len() * dim);
    for row in &window.features {
        if row.len() != dim {
            return Err(AnomalyError::Shape { expected: dim, got: row.len() });
        }
        x.extend_from_slice(row);
    }
    if x.is_empty() {
        return Err(AnomalyError::Shape { expected: dim, got: 0 });
    }
    let y = model.reconstruct(&x);
    Ok(y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// mean + k · population std.
pub fn calibrate_threshold(errors: &[f64], k: f64) -> Result<f64, AnomalyError> {
    if errors.len() < 2 {
        return Err(AnomalyError::Config(format!("need at least 2 training errors, got {}", errors.len())));
    }
    if k < 0.0 || !k.is_finite() {
        return Err(AnomalyError::Config(format!("k = {k} must be a non-negative number")));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + k * var.sqrt())
}

/// Reconstruction errors of raw windows under the model's own normalizer,
/// in input order. Work is split across threads; results keep their order.
pub fn score_windows(model: &LstmModel, windows: &[Window]) -> Result<Vec<f64>, AnomalyError> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8);
    let per = windows.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = windows
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(|w| model.score(w)).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut out = Vec::with_capacity(windows.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread")?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests;

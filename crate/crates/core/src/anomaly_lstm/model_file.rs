use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnomalyError, Layout, LstmModel, Normalizer, MODEL_FORMAT_VERSION};

/// On-disk JSON form of a model. Matrices are row-major; gate blocks are
/// stacked in the order given by `gate_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gate_order: String,
    pub normalizer: Normalizer,
    pub seed: u64,
    pub loss_history: Vec<f64>,
    /// 4·hidden × input.
    pub encoder_input_weights: Vec<f64>,
    /// 4·hidden × hidden.
    pub encoder_recurrent_weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_recurrent_weights: Vec<f64>,
    pub decoder_bias: Vec<f64>,
    /// input × hidden.
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

const GATE_ORDER: &str = "input,forget,cell,output";

impl From<&LstmModel> for ModelFile {
    fn from(m: &LstmModel) -> Self {
        let l = m.layout;
        let p = &m.params;
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            input_dim: l.input,
            hidden_dim: l.hidden,
            gate_order: GATE_ORDER.into(),
            normalizer: m.normalizer.clone(),
            seed: m.seed,
            loss_history: m.loss_history.clone(),
            encoder_input_weights: p[l.enc_w..l.enc_u].to_vec(),
            encoder_recurrent_weights: p[l.enc_u..l.enc_b].to_vec(),
            encoder_bias: p[l.enc_b..l.dec_u].to_vec(),
            decoder_recurrent_weights: p[l.dec_u..l.dec_b].to_vec(),
            decoder_bias: p[l.dec_b..l.out_w].to_vec(),
            output_weights: p[l.out_w..l.out_b].to_vec(),
            output_bias: p[l.out_b..l.len].to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for LstmModel {
    type Error = String;

    fn try_from(f: ModelFile) -> Result<Self, String> {
        if f.version != MODEL_FORMAT_VERSION {
            return Err(format!("unsupported version {}", f.version));
        }
        if f.gate_order != GATE_ORDER {
            return Err(format!("unsupported gate order {:?}", f.gate_order));
        }
        let l = Layout::new(f.input_dim, f.hidden_dim);
        let blocks = [
            ("encoder_input_weights", f.encoder_input_weights, l.enc_u - l.enc_w),
            ("encoder_recurrent_weights", f.encoder_recurrent_weights, l.enc_b - l.enc_u),
            ("encoder_bias", f.encoder_bias, l.dec_u - l.enc_b),
            ("decoder_recurrent_weights", f.decoder_recurrent_weights, l.dec_b - l.dec_u),
            ("decoder_bias", f.decoder_bias, l.out_w - l.dec_b),
            ("output_weights", f.output_weights, l.out_b - l.out_w),
            ("output_bias", f.output_bias, l.len - l.out_b),
        ];
        let mut params = Vec::with_capacity(l.len);
        for (name, values, expected) in blocks {
            if values.len() != expected {
                return Err(format!("{name} has {} values, expected {expected}", values.len()));
            }
            params.extend(values);
        }
        if f.normalizer.dim() != f.input_dim || f.normalizer.std.len() != f.input_dim {
            return Err("normalizer dimension does not match input_dim".into());
        }
        if f.normalizer.std.iter().any(|s| *s <= 0.0) {
            return Err("normalizer std must be positive".into());
        }
        Ok(LstmModel { layout: l, params, normalizer: f.normalizer, seed: f.seed, loss_history: f.loss_history })
    }
}

pub fn save_model(path: &Path, model: &LstmModel) -> Result<(), AnomalyError> {
    let err = |message: String| AnomalyError::ModelFile { path: path.display().to_string(), message };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
    }
    let text = serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes");
    std::fs::write(path, text + "\n").map_err(|e| err(e.to_string()))
}

pub fn load_model(path: &Path) -> Result<LstmModel, AnomalyError> {
    let err = |message: String| AnomalyError::ModelFile { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| {
        let offset: usize = text.lines().take(e.line().saturating_sub(1)).map(|l| l.len() + 1).sum::<usize>()
            + e.column().saturating_sub(1);
        err(format!("line {} (byte {offset}): {e}", e.line()))
    })?;
    LstmModel::try_from(file).map_err(err)
}

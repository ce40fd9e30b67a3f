//! The TOML run configuration and its command-line overrides.
//!
//! Precedence is flags, then environment, then file. The environment only
//! supplies provider API keys, through the variable each model names in
//! `api_key_env`.

use std::path::{Path, PathBuf};

use gazelens::anomaly_lstm::{DEFAULT_STRIDE, DEFAULT_WINDOW_LEN};
use gazelens::gaze_data::{CleanConfig, ColumnSchema};
use gazelens::llm_gateway::{
    default_label, Gateway, MockConfig, MockFallback, ModelSpec, ProviderConfig, RetryPolicy,
};
use gazelens::pattern_miner::{Matcher, MiningConfig};
use gazelens::segmentation::{PromptLevel, DEFAULT_CHUNK_BUDGET};
use gazelens::templates::TemplateSet;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// File looked up in the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "gazelens.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Deterministic offline answers for every configured model.
    #[default]
    Mock,
    /// The chat-completion endpoints declared in `[[models]]`.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    /// Directory holding `runs/`.
    pub store: PathBuf,
    pub provider: ProviderKind,
    /// Directory of `<slot>.txt` prompt templates overriding the built-ins.
    pub templates_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub clean: CleanConfig,
    pub mining: MiningSection,
    /// Report models; empty means the `gpt4o`, `o1`, `r1` trio.
    pub models: Vec<ModelSpec>,
    pub anomaly: AnomalySection,
    pub difficulty: DifficultySection,
    pub gateway: GatewaySection,
    pub serve: ServeSection,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            seed: 7,
            store: PathBuf::from("."),
            provider: ProviderKind::Mock,
            templates_dir: None,
            data: DataConfig::default(),
            clean: CleanConfig::default(),
            mining: MiningSection::default(),
            models: Vec::new(),
            anomaly: AnomalySection::default(),
            difficulty: DifficultySection::default(),
            gateway: GatewaySection::default(),
            serve: ServeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Delimited gaze export.
    pub input: Option<PathBuf>,
    /// JSON array of AOI definitions.
    pub aoi: Option<PathBuf>,
    /// Column layout of the export; the default eleven columns when absent.
    pub schema: Option<ColumnSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSection {
    pub n_runs: u32,
    pub chunk_budget: usize,
    pub levels: Vec<PromptLevel>,
    pub include_direct: bool,
    pub matcher: Matcher,
}

impl Default for MiningSection {
    fn default() -> Self {
        let m = MiningConfig::default();
        MiningSection {
            n_runs: m.n_runs,
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            levels: m.levels,
            include_direct: m.include_direct,
            matcher: m.matcher,
        }
    }
}

impl MiningSection {
    pub fn to_mining_config(&self) -> MiningConfig {
        MiningConfig {
            n_runs: self.n_runs,
            chunk_budget: self.chunk_budget,
            matcher: self.matcher,
            levels: self.levels.clone(),
            include_direct: self.include_direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySection {
    pub window_len: usize,
    pub stride: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Threshold is mean + k · std of the expert training errors.
    pub k: f64,
    /// Students to score; empty means every student.
    pub students: Vec<String>,
    pub top_n: usize,
}

impl Default for AnomalySection {
    fn default() -> Self {
        AnomalySection {
            window_len: DEFAULT_WINDOW_LEN,
            stride: DEFAULT_STRIDE,
            hidden_dim: 16,
            epochs: 100,
            learning_rate: 0.01,
            clip_norm: 5.0,
            k: 3.0,
            students: Vec::new(),
            top_n: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DifficultySection {
    /// JSON array of question items; the built-in corpus when absent.
    pub questions: Option<PathBuf>,
    pub repetitions: u32,
    /// Words removed from question text; the built-in lexicon when absent.
    pub lexicon: Option<Vec<String>>,
    pub budget: usize,
    /// Unscripted answer of mock models in this stage.
    pub mock_fallback: MockFallback,
}

impl Default for DifficultySection {
    fn default() -> Self {
        DifficultySection {
            questions: None,
            repetitions: 5,
            lexicon: None,
            budget: 200_000,
            mock_fallback: MockFallback::LevelGuess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_in_flight: usize,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let r = RetryPolicy::default();
        GatewaySection { max_attempts: r.max_attempts, base_delay_ms: r.base_delay_ms, max_in_flight: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: String,
    /// Built review console served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection { addr: "127.0.0.1:8080".into(), ui_dir: None }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
}

impl AppConfig {
    /// Parses TOML text; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<AppConfig, AppError> {
        let mut cfg: AppConfig = toml::from_str(text).map_err(|e| AppError::Config(one_line(&e.to_string())))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Reads `path`, or `gazelens.toml` in the working directory, or falls
    /// back to the defaults, then applies the overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<AppConfig, AppError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                AppConfig::from_toml(&text, &base).map_err(|e| match e {
                    AppError::Config(m) => AppError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })?
            }
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => {
                return AppConfig::load(Some(Path::new(DEFAULT_CONFIG_FILE)), overrides);
            }
            None => AppConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(provider) = overrides.provider {
            self.provider = provider;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined: PathBuf =
                    base.join(&*p).components().filter(|c| *c != std::path::Component::CurDir).collect();
                *p = if joined.as_os_str().is_empty() { PathBuf::from(".") } else { joined };
            }
        };
        fix(&mut self.store);
        for p in [
            &mut self.templates_dir,
            &mut self.data.input,
            &mut self.data.aoi,
            &mut self.difficulty.questions,
            &mut self.serve.ui_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The models stages run against. Under the mock provider every model
    /// keeps its id and label but answers through the mock seeded with the
    /// run seed, unless it already declares a mock configuration.
    pub fn effective_models(&self) -> Result<Vec<ModelSpec>, AppError> {
        let declared = if self.models.is_empty() { ModelSpec::mock_trio(self.seed) } else { self.models.clone() };
        match self.provider {
            ProviderKind::Mock => Ok(declared
                .into_iter()
                .map(|m| match m.provider {
                    ProviderConfig::Mock(_) => m,
                    ProviderConfig::Http { .. } => ModelSpec { provider: ProviderConfig::Mock(MockConfig::new(self.seed)), ..m },
                })
                .collect()),
            ProviderKind::Http => {
                if self.models.is_empty() {
                    return Err(AppError::Config("provider http needs at least one [[models]] entry".into()));
                }
                if let Some(m) = declared.iter().find(|m| !matches!(m.provider, ProviderConfig::Http { .. })) {
                    return Err(AppError::Config(format!("model {} has no http provider settings", m.model_id)));
                }
                Ok(declared)
            }
        }
    }

    /// Report column of a model id.
    pub fn column_of(&self, model_id: &str) -> String {
        self.models
            .iter()
            .find(|m| m.model_id == model_id)
            .map(|m| m.label.clone())
            .unwrap_or_else(|| default_label(model_id))
    }

    pub fn columns(&self) -> Result<Vec<String>, AppError> {
        Ok(self.effective_models()?.iter().map(|m| m.label.clone()).collect())
    }

    pub fn gateway(&self) -> Gateway {
        let retry = RetryPolicy { max_attempts: self.gateway.max_attempts, base_delay_ms: self.gateway.base_delay_ms };
        Gateway::new(retry, self.gateway.max_in_flight)
    }

    pub fn templates(&self) -> Result<TemplateSet, AppError> {
        match &self.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir)
                .map_err(|e| AppError::Config(format!("templates {}: {e}", dir.display()))),
            None => Ok(TemplateSet::default()),
        }
    }

    pub fn schema(&self) -> ColumnSchema {
        self.data.schema.clone().unwrap_or_default()
    }
}

/// Collapses a multi-line message into one line.
pub fn one_line(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}

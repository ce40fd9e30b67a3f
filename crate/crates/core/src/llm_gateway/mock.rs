use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatRequest, Provider, ProviderError};
use crate::digest::seed_from;

/// Statements the mock draws its pattern lists from.
pub const MOCK_VOCABULARY: &[&str] = &[
    "Students fixate longer on the error region than experts before the first edit",
    "Experts reach the problem area within the first few fixations",
    "Navigators spend more time on the question stem than drivers",
    "Drivers show shorter saccades while scanning code line by line",
    "Fixation duration increases on harder questions for students",
    "Experts alternate between stem and error region in regular cycles",
    "Students revisit the question stem repeatedly after reading the code",
    "Long fixations on the error region precede correct answers",
    "Saccade duration drops when participants converge on the bug",
    "Students show scattered gaze positions early in each task",
    "Experts keep gaze within a narrow vertical band of the code",
    "Navigators follow the driver's gaze with a short lag",
    "Fixation counts on the error region peak in the middle of a task",
    "Role switches coincide with longer saccades",
    "Students fixate on syntax tokens more than on control flow",
    "Experts skip boilerplate lines with fast saccades",
    "Prolonged fixations on the stem indicate rereading of requirements",
    "Gaze dispersion narrows as task time progresses",
    "Students' fixation durations are more variable than experts'",
    "Experts show fewer regressions to previously read lines",
    "High saccade counts accompany uncertainty about the task goal",
    "Drivers fixate near the cursor position while navigators roam",
    "Attention shifts to the error region after a failed attempt",
    "Cognitive load rises on questions with nested loops",
    "Students underuse the question stem on easy questions",
    "Experts spend a stable share of time in the error region across questions",
    "Short fixation bursts mark skimming of unfamiliar code",
    "Late fixations on the stem signal answer verification",
    "Fixation durations lengthen after long saccades",
    "Students show attention drift toward screen edges on hard questions",
    "Pairs of students split attention between different code regions",
    "Expert pairs fixate on the same region at the same time more often",
    "Gaze returns to the error region several times before resolution",
    "Saccade lengths shorten within the error region",
    "Students fixate longer on variable names than experts",
    "Experts move quickly from the stem to the first relevant line",
    "Navigators fixate on the error region earlier than drivers in mixed pairs",
    "Repeated short fixations indicate search for a specific token",
    "Gaze on the stem drops sharply once the bug is located",
    "Students show higher fixation counts on medium questions than on hard ones",
    "Experts exhibit lower saccade counts per question overall",
    "Fixations cluster around conditional statements in buggy code",
    "Students spend more total time per question than experts",
    "Attention oscillates between two candidate bug locations",
    "Drivers fixate less on the stem when navigators are experts",
    "Long saccades across the screen mark strategy changes",
    "Fixation duration on the error region predicts task success",
    "Gaze patterns become more expert-like on later questions",
];

/// What the mock answers when no scripted response matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFallback {
    /// A numbered list of 3 to 8 vocabulary statements.
    #[default]
    Patterns,
    /// `Pnn: level` for every `Pnn` question label in the prompt.
    LevelGuess,
    /// Empty text.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub seed: u64,
    /// Canned responses keyed by prompt digest, or by `digest#run_index`
    /// for a single repetition.
    #[serde(default)]
    pub scripted: BTreeMap<String, String>,
    #[serde(default)]
    pub fallback: MockFallback,
    /// Run indices that always fail with a transient transport error.
    #[serde(default)]
    pub fail_runs: BTreeSet<u32>,
}

impl MockConfig {
    pub fn new(seed: u64) -> Self {
        MockConfig { seed, scripted: BTreeMap::new(), fallback: MockFallback::default(), fail_runs: BTreeSet::new() }
    }

    pub fn with_fallback(mut self, fallback: MockFallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn script(mut self, digest: impl Into<String>, response: impl Into<String>) -> Self {
        self.scripted.insert(digest.into(), response.into());
        self
    }
}

/// Deterministic provider: the answer is a pure function of the prompt
/// digest, run index, model id and seed.
pub struct MockProvider {
    config: MockConfig,
}

static QUESTION_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bP\d{2}\b").expect("valid regex"));

const LEVELS: [&str; 3] = ["easy", "medium", "hard"];

impl MockProvider {
    pub fn new(config: MockConfig) -> Self {
        MockProvider { config }
    }

    fn rng(&self, request: &ChatRequest<'_>) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed_from(&[
            &self.config.seed.to_string(),
            &request.spec.model_id,
            request.digest,
            &request.run_index.to_string(),
        ]))
    }

    /// Vocabulary indices a model can produce: each model sees a fixed two
    /// thirds of the vocabulary, so some statements are unique to one model.
    pub fn visible_indices(model_id: &str) -> Vec<usize> {
        (0..MOCK_VOCABULARY.len())
            .filter(|i| !seed_from(&[model_id, &i.to_string()]).is_multiple_of(3))
            .collect()
    }

    fn patterns(&self, request: &ChatRequest<'_>) -> String {
        let mut rng = self.rng(request);
        let visible = Self::visible_indices(&request.spec.model_id);
        let k = rng.random_range(3..=8usize).min(visible.len());
        index::sample(&mut rng, visible.len(), k)
            .into_iter()
            .enumerate()
            .map(|(n, i)| format!("{}. {}.", n + 1, MOCK_VOCABULARY[visible[i]]))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn level_guess(&self, request: &ChatRequest<'_>) -> String {
        let mut rng = self.rng(request);
        let mut seen = BTreeSet::new();
        QUESTION_LABEL
            .find_iter(request.prompt)
            .map(|m| m.as_str())
            .filter(|l| seen.insert(*l))
            .map(|l| format!("{l}: {}", LEVELS[rng.random_range(0..3)]))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Provider for MockProvider {
    fn send(&self, request: &ChatRequest<'_>) -> Result<String, ProviderError> {
        if self.config.fail_runs.contains(&request.run_index) {
            return Err(ProviderError::Transient {
                status: Some(503),
                message: format!("injected failure for run {}", request.run_index),
            });
        }
        let run_key = format!("{}#{}", request.digest, request.run_index);
        if let Some(text) = self.config.scripted.get(&run_key).or_else(|| self.config.scripted.get(request.digest)) {
            return Ok(text.clone());
        }
        Ok(match self.config.fallback {
            MockFallback::Patterns => self.patterns(request),
            MockFallback::LevelGuess => self.level_guess(request),
            MockFallback::Empty => String::new(),
        })
    }
}

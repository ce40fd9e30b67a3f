//! Question-difficulty prediction: anonymize the question corpus, ask each
//! model for a level per question under several prompt and module settings,
//! and score the answers against the declared levels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gaze_data::GazeTable;
use crate::grid::{difficulty_rows, ExperimentGrid};
use crate::llm_gateway::{Gateway, GatewayError, ModelSpec};
use crate::segmentation::{
    build_bundle, split_horizontal, split_vertical, BundleOptions, ColumnPairPayload, Payload, PromptBundle,
    RowPayload, SegmentationError, Stage,
};
use crate::templates::{TemplateSet, TemplateSlot};


#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Total,
    None,
}

impl std::str::FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "total" => Ok(PromptVariant::Total),
            "none" => Ok(PromptVariant::None),
            other => Err(format!("unknown prompt variant {other:?}; only total and none are supported")),
        }
    }
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 2] = [PromptVariant::Total, PromptVariant::None];

    pub fn label(self) -> &'static str {
        match self {
            PromptVariant::Total => "total",
            PromptVariant::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyLevel {
    Easy,
    Medium,
    Hard,
}

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; 3] = [DifficultyLevel::Easy, DifficultyLevel::Medium, DifficultyLevel::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLevel::Easy => "easy",
            DifficultyLevel::Medium => "medium",
            DifficultyLevel::Hard => "hard",
        }
    }
}

impl std::str::FromStr for DifficultyLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" => Ok(DifficultyLevel::Easy),
            "medium" => Ok(DifficultyLevel::Medium),
            "hard" => Ok(DifficultyLevel::Hard),
            other => Err(format!("unknown difficulty level {other:?}")),
        }
    }
}

/// Level of every built-in question: four easy, four medium, four hard.
pub fn default_question_levels() -> BTreeMap<String, DifficultyLevel> {
    use DifficultyLevel::*;
    [
        ("A1", Easy),
        ("A2", Medium),
        ("A3", Hard),
        ("B1", Hard),
        ("B2", Easy),
        ("B3", Easy),
        ("C1", Medium),
        ("C2", Hard),
        ("C3", Medium),
        ("D1", Easy),
        ("D2", Hard),
        ("D3", Medium),
    ]
    .into_iter()
    .map(|(q, l)| (q.to_string(), l))
    .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum DifficultyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid question set: {0}")]
    Validation(String),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// One question of the corpus. The on-disk form is `{question_id, level, text}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub question_id: String,
    #[serde(rename = "level")]
    pub true_level: DifficultyLevel,
    #[serde(rename = "text")]
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymized_text: Option<String>,
    /// Neutral label shown to the model, e.g. `P07`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl QuestionItem {
    pub fn new(question_id: &str, level: DifficultyLevel, text: &str) -> Self {
        QuestionItem {
            question_id: question_id.into(),
            true_level: level,
            raw_text: text.into(),
            anonymized_text: None,
            label: None,
        }
    }
}

/// Twelve short programming tasks, four per level, with the levels of
/// [`default_question_levels`]. Several carry difficulty hints and numbering
/// that [`anonymize`] has to remove.
pub fn question_corpus() -> Vec<QuestionItem> {
    let levels = default_question_levels();
    [
        ("A1", "EASY: Write a function that returns the sum of all even numbers in a list of integers."),
        ("A2", "Check whether a string made of (), [] and {} characters is balanced."),
        ("A3", "Question 3 (hard). Given a weighted directed graph, return the length of the shortest path between two nodes, or -1 if none exists."),
        ("B1", "The merge step of this merge sort loses elements whenever one half runs out first. Find and fix the bug."),
        ("B2", "Warm-up: the loop meant to print 1 to 10 prints 0 to 9. Correct it."),
        ("B3", "Swap the values of two variables and print both."),
        ("C1", "Medium difficulty. Reverse a singly linked list in place and return the new head."),
        ("C2", "Tricky: implement a least-recently-used cache with constant-time get and put."),
        ("C3", "Count how often each word occurs in a text and return the k most frequent words."),
        ("D1", "Simple task: return the largest of three integers."),
        ("D2", "Detect whether a linked list has a cycle and return the node where the cycle begins; a challenging problem."),
        ("D3", "Q12. Remove duplicates from a sorted array in place and return the new length."),
    ]
    .into_iter()
    .map(|(q, text)| QuestionItem::new(q, levels[q], text))
    .collect()
}

/// Exactly twelve items with unique ids and four per level.
pub fn validate_items(items: &[QuestionItem]) -> Result<(), DifficultyError> {
    if items.len() != 12 {
        return Err(DifficultyError::Validation(format!("expected 12 questions, got {}", items.len())));
    }
    let ids: BTreeSet<&str> = items.iter().map(|i| i.question_id.as_str()).collect();
    if ids.len() != items.len() {
        return Err(DifficultyError::Validation("question ids are not unique".into()));
    }
    for level in DifficultyLevel::ALL {
        let n = items.iter().filter(|i| i.true_level == level).count();
        if n != 4 {
            return Err(DifficultyError::Validation(format!("expected 4 {} questions, got {n}", level.as_str())));
        }
    }
    Ok(())
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionItem>, DifficultyError> {
    let err = |message: String| DifficultyError::File { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn save_questions(path: &Path, items: &[QuestionItem]) -> Result<(), DifficultyError> {
    let err = |message: String| DifficultyError::File { path: path.display().to_string(), message };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
    }
    let text = serde_json::to_string_pretty(items).expect("questions serialize");
    std::fs::write(path, text + "\n").map_err(|e| err(e.to_string()))
}

/// Words that reveal a question's level.
pub const DEFAULT_LEXICON: [&str; 17] = [
    "easy",
    "medium",
    "hard",
    "difficult",
    "difficulty",
    "simple",
    "trivial",
    "basic",
    "beginner",
    "intermediate",
    "advanced",
    "challenging",
    "tricky",
    "warm-up",
    "warmup",
    "bonus",
    "straightforward",
];

fn lexicon_regex(lexicon: &[String]) -> Option<Regex> {
    if lexicon.is_empty() {
        return None;
    }
    let alternatives: Vec<String> = lexicon.iter().map(|w| regex::escape(w)).collect();
    Some(Regex::new(&format!(r"(?i)\b(?:{})\b", alternatives.join("|"))).expect("escaped lexicon"))
}

static NUMBERING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:(?:question|exercise|problem|task|q)\s*)?#?\d+\s*[.:)\-]\s*").expect("numbering regex")
});
static ORIGINAL_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-D][1-3]\b").expect("id regex"));
static EMPTY_BRACKETS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\s*\)|\[\s*\]").expect("bracket regex"));
static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+([.,;:!?])").expect("punct regex"));
static REPEATED_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([.,;:!?])[.,;:!?]+").expect("punct regex"));
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").expect("space regex"));
static LEADING_JUNK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\s.,;:!?\-]+").expect("leading regex"));

/// Lexicon terms found in `text`, lowercased, in order of appearance.
pub fn lexicon_hits(text: &str, lexicon: &[String]) -> Vec<String> {
    lexicon_regex(lexicon)
        .map(|re| re.find_iter(text).map(|m| m.as_str().to_ascii_lowercase()).collect())
        .unwrap_or_default()
}

/// Removes lexicon terms, leading numbering and original question ids, then
/// tidies the punctuation left behind. Applying it twice changes nothing.
pub fn anonymize_text(text: &str, lexicon: &[String]) -> String {
    let re = lexicon_regex(lexicon);
    let mut current = text.to_string();
    loop {
        let mut t = current.clone();
        if let Some(re) = &re {
            t = re.replace_all(&t, "").into_owned();
        }
        t = ORIGINAL_ID.replace_all(&t, "").into_owned();
        t = EMPTY_BRACKETS.replace_all(&t, "").into_owned();
        t = SPACES.replace_all(&t, " ").into_owned();
        t = SPACE_BEFORE_PUNCT.replace_all(&t, "$1").into_owned();
        t = REPEATED_PUNCT.replace_all(&t, "$1").into_owned();
        t = NUMBERING.replace(&t, "").into_owned();
        t = LEADING_JUNK.replace(&t, "").into_owned();
        t = t.trim().to_string();
        if let Some(first) = t.chars().next() {
            if first.is_lowercase() {
                t = first.to_uppercase().collect::<String>() + &t[first.len_utf8()..];
            }
        }
        if t == current {
            return t;
        }
        current = t;
    }
}

/// Anonymized copies of `items` in a seeded presentation order, labeled
/// `P01`, `P02`, … in that order.
pub fn anonymize(items: &[QuestionItem], lexicon: &[String], seed: u64) -> Vec<QuestionItem> {
    let mut out: Vec<QuestionItem> = items
        .iter()
        .map(|i| QuestionItem { anonymized_text: Some(anonymize_text(&i.raw_text, lexicon)), ..i.clone() })
        .collect();
    out.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (n, item) in out.iter_mut().enumerate() {
        item.label = Some(format!("P{:02}", n + 1));
    }
    out
}

pub fn default_lexicon() -> Vec<String> {
    DEFAULT_LEXICON.iter().map(|s| s.to_string()).collect()
}

fn label_of(item: &QuestionItem) -> Result<&str, DifficultyError> {
    item.label
        .as_deref()
        .ok_or_else(|| DifficultyError::Config(format!("question {} is not anonymized", item.question_id)))
}

/// Gaze payloads with question ids replaced by the presentation labels, so
/// the data carry no original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeArtifacts {
    pub horizontal: Vec<RowPayload>,
    pub vertical: Vec<ColumnPairPayload>,
}

impl GazeArtifacts {
    /// Keeps only rows of the given questions.
    pub fn from_table(table: &GazeTable, items: &[QuestionItem]) -> Result<GazeArtifacts, DifficultyError> {
        let mut relabel = BTreeMap::new();
        for item in items {
            relabel.insert(item.question_id.clone(), label_of(item)?.to_string());
        }
        let records = table
            .records
            .iter()
            .filter_map(|r| {
                let label = relabel.get(r.question_id.as_deref()?)?;
                let mut r = r.clone();
                r.question_id = Some(label.clone());
                Some(r)
            })
            .collect();
        let relabeled = table.with_records(records);
        Ok(GazeArtifacts { horizontal: split_horizontal(&relabeled), vertical: split_vertical(&relabeled)? })
    }
}

enum GazePayload<'a> {
    Row(&'a RowPayload),
    Pair(&'a ColumnPairPayload),
}

impl Payload for GazePayload<'_> {
    fn label(&self) -> String {
        match self {
            GazePayload::Row(p) => p.label(),
            GazePayload::Pair(p) => p.label(),
        }
    }

    fn canonical(&self) -> String {
        match self {
            GazePayload::Row(p) => p.canonical(),
            GazePayload::Pair(p) => p.canonical(),
        }
    }
}

/// `Directly(total)`, `h+v(none)` and so on.
pub fn setting_label(setting: Stage, variant: PromptVariant) -> String {
    format!("{}({})", setting.label(), variant.label())
}

/// The seven settings of the difficulty table, in row order.
pub fn default_settings() -> Vec<(Stage, PromptVariant)> {
    let mut out = vec![(Stage::Direct, PromptVariant::Total)];
    for variant in PromptVariant::ALL {
        for stage in Stage::MODULES {
            out.push((stage, variant));
        }
    }
    out
}

/// Lists the anonymized questions in presentation order and attaches the
/// payloads of the module setting: rows for `h`, column pairs for `v`, both
/// for `h+v`, none for the direct setting.
pub fn build_difficulty_prompt(
    items: &[QuestionItem],
    variant: PromptVariant,
    setting: Stage,
    gaze: Option<&GazeArtifacts>,
    templates: &TemplateSet,
    budget: usize,
) -> Result<PromptBundle, DifficultyError> {
    let mut ordered: Vec<&QuestionItem> = items.iter().collect();
    ordered.sort_by(|a, b| a.label.cmp(&b.label));
    let mut lines = Vec::new();
    for item in ordered {
        let text = item
            .anonymized_text
            .as_deref()
            .ok_or_else(|| DifficultyError::Config(format!("question {} is not anonymized", item.question_id)))?;
        lines.push(format!("{}: {text}", label_of(item)?));
    }
    let payloads: Vec<GazePayload> = match (setting, gaze) {
        (Stage::Direct, _) => Vec::new(),
        (_, None) => {
            return Err(DifficultyError::Config(format!(
                "the {} setting needs gaze data",
                setting.label()
            )))
        }
        (Stage::Horizontal, Some(g)) => g.horizontal.iter().map(GazePayload::Row).collect(),
        (Stage::Vertical, Some(g)) => g.vertical.iter().map(GazePayload::Pair).collect(),
        (Stage::Combined, Some(g)) => g
            .horizontal
            .iter()
            .map(GazePayload::Row)
            .chain(g.vertical.iter().map(GazePayload::Pair))
            .collect(),
    };
    let options = BundleOptions { carried_patterns: None, context: vec![("QUESTIONS", lines.join("\n"))] };
    Ok(build_bundle(&payloads, TemplateSlot::Difficulty { variant }, templates, budget, options)?)
}

static ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(P\d{2})\b\s*[:\-–=]?\s*\(?\s*(easy|medium|hard)\b").expect("answer regex")
});

/// Level per presentation label, first answer per label wins. Labels not in
/// `labels` are ignored.
pub fn parse_levels(text: &str, labels: &BTreeSet<String>) -> BTreeMap<String, DifficultyLevel> {
    let mut out = BTreeMap::new();
    for c in ANSWER.captures_iter(text) {
        let label = c[1].to_ascii_uppercase();
        if labels.contains(&label) && !out.contains_key(&label) {
            out.insert(label, c[2].parse().expect("regex limits the levels"));
        }
    }
    out
}

/// One repetition of one setting for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRun {
    pub model_id: String,
    pub prompt_variant: PromptVariant,
    pub module_setting: Stage,
    pub repetition: u32,
    /// Every question id; `None` where no level could be parsed.
    pub predictions: BTreeMap<String, Option<DifficultyLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRun {
    pub fn parsed(&self) -> usize {
        self.predictions.values().filter(|p| p.is_some()).count()
    }

    /// Correct answers over all questions; unparsed answers count as wrong.
    pub fn accuracy(&self, items: &[QuestionItem]) -> f64 {
        let correct = items
            .iter()
            .filter(|i| self.predictions.get(&i.question_id).copied().flatten() == Some(i.true_level))
            .count();
        correct as f64 / items.len() as f64
    }
}

/// Mean accuracy, or `None` when no repetition produced a single parseable
/// answer.
pub fn cell_accuracy(runs: &[&PredictionRun], items: &[QuestionItem]) -> Option<f64> {
    if runs.is_empty() || runs.iter().all(|r| r.parsed() == 0) {
        return None;
    }
    Some(runs.iter().map(|r| r.accuracy(items)).sum::<f64>() / runs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyConfig {
    pub repetitions: u32,
    pub settings: Vec<(Stage, PromptVariant)>,
    /// Character budget for the data part of each prompt.
    pub budget: usize,
}

impl Default for DifficultyConfig {
    fn default() -> Self {
        DifficultyConfig { repetitions: 5, settings: default_settings(), budget: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyOutcome {
    pub grid: ExperimentGrid,
    pub runs: Vec<PredictionRun>,
    pub bundles: Vec<(String, PromptBundle)>,
}

/// Runs every setting against every model and scores the answers. Items
/// must already be anonymized. A repetition whose requests all failed
/// counts as one with no parseable answers.
pub fn run_and_score(
    gateway: &Gateway,
    items: &[QuestionItem],
    specs: &[ModelSpec],
    gaze: Option<&GazeArtifacts>,
    templates: &TemplateSet,
    cfg: &DifficultyConfig,
) -> Result<DifficultyOutcome, DifficultyError> {
    if cfg.repetitions == 0 {
        return Err(DifficultyError::Config("repetitions must be at least 1".into()));
    }
    let mut by_label: BTreeMap<String, &QuestionItem> = BTreeMap::new();
    for item in items {
        by_label.insert(label_of(item)?.to_string(), item);
    }
    let labels: BTreeSet<String> = by_label.keys().cloned().collect();
    let mut rows = difficulty_rows();
    for (s, v) in &cfg.settings {
        let label = setting_label(*s, *v);
        if !rows.contains(&label) {
            rows.push(label);
        }
    }
    let columns: Vec<String> = specs.iter().map(|s| s.label.clone()).collect();
    let mut grid = ExperimentGrid::new(rows, columns);
    let mut runs = Vec::new();
    let mut bundles = Vec::new();

    for &(setting, variant) in &cfg.settings {
        let bundle = build_difficulty_prompt(items, variant, setting, gaze, templates, cfg.budget)?;
        for spec in specs {
            let (responses, failures) = match gateway.run_repeated(&bundle, spec, cfg.repetitions) {
                Ok(r) => (r.responses, r.failures),
                Err(GatewayError::AllRunsFailed { failures }) => (Vec::new(), failures),
                Err(e) => return Err(DifficultyError::Config(e.to_string())),
            };
            let mut cell_runs = Vec::new();
            for rep in 0..cfg.repetitions {
                let mut answers: BTreeMap<String, DifficultyLevel> = BTreeMap::new();
                for r in responses.iter().filter(|r| r.run_index == rep) {
                    for (label, level) in parse_levels(&r.text, &labels) {
                        answers.entry(label).or_insert(level);
                    }
                }
                let predictions = by_label
                    .iter()
                    .map(|(label, item)| (item.question_id.clone(), answers.get(label).copied()))
                    .collect();
                let error = failures.iter().find(|f| f.run_index == rep).map(|f| f.error.clone());
                cell_runs.push(PredictionRun {
                    model_id: spec.model_id.clone(),
                    prompt_variant: variant,
                    module_setting: setting,
                    repetition: rep,
                    predictions,
                    error,
                });
            }
            let refs: Vec<&PredictionRun> = cell_runs.iter().collect();
            grid.set(&setting_label(setting, variant), &spec.label, cell_accuracy(&refs, items))
                .expect("rows and columns come from the same settings");
            runs.extend(cell_runs);
        }
        bundles.push((setting_label(setting, variant), bundle));
    }
    Ok(DifficultyOutcome { grid, runs, bundles })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::digest::sha256_hex;
    use crate::llm_gateway::{MockConfig, MockFallback, RetryPolicy};
    use crate::synthetic::{generate_export, DefectCounts, ExportConfig};

    fn gateway() -> Gateway {
        Gateway::new(RetryPolicy { max_attempts: 1, base_delay_ms: 0 }, 4)
    }

    fn anonymized() -> Vec<QuestionItem> {
        anonymize(&question_corpus(), &default_lexicon(), 9)
    }

    fn answer_sheet(items: &[QuestionItem], correct: usize) -> String {
        let mut sorted: Vec<&QuestionItem> = items.iter().collect();
        sorted.sort_by(|a, b| a.label.cmp(&b.label));
        sorted
            .iter()
            .enumerate()
            .map(|(n, i)| {
                let level = if n < correct {
                    i.true_level
                } else {
                    match i.true_level {
                        DifficultyLevel::Easy => DifficultyLevel::Hard,
                        _ => DifficultyLevel::Easy,
                    }
                };
                format!("{}: {}", i.label.as_deref().unwrap(), level.as_str())
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn corpus_is_balanced() {
        validate_items(&question_corpus()).unwrap();
        let mut short = question_corpus();
        short.pop();
        assert!(validate_items(&short).is_err());
    }

    #[test]
    fn prefix_is_removed() {
        let lex = default_lexicon();
        assert_eq!(anonymize_text("EASY: Sort a list.", &lex), "Sort a list.");
        assert_eq!(anonymize_text("Question 3 (hard). Find a path.", &lex), "Find a path.");
        assert_eq!(anonymize_text("Reverse a string.", &lex), "Reverse a string.");
    }

    #[test]
    fn anonymized_corpus_has_no_hits() {
        let lex = default_lexicon();
        for item in anonymized() {
            let text = item.anonymized_text.unwrap();
            assert!(lexicon_hits(&text, &lex).is_empty(), "{text}");
            assert!(!ORIGINAL_ID.is_match(&text), "{text}");
            assert!(!NUMBERING.is_match(&text), "{text}");
        }
        assert!(!lexicon_hits(&question_corpus()[0].raw_text, &lex).is_empty());
    }

    #[test]
    fn order_is_shuffled_by_seed() {
        let a: Vec<String> = anonymize(&question_corpus(), &default_lexicon(), 1).into_iter().map(|i| i.question_id).collect();
        let b: Vec<String> = anonymize(&question_corpus(), &default_lexicon(), 1).into_iter().map(|i| i.question_id).collect();
        let c: Vec<String> = anonymize(&question_corpus(), &default_lexicon(), 2).into_iter().map(|i| i.question_id).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn anonymization_is_idempotent_and_complete(
            words in prop::collection::vec(prop::sample::select(vec![
                "Easy", "HARD", "medium", "sort", "list", "(", ")", ":", ".", "Question", "7", "A1", "tricky",
                "warm-up", "graph", "-", "the", "difficulty", "C3", "Q4.", ",",
            ]), 0..25)
        ) {
            let lex = default_lexicon();
            let text = words.join(" ");
            let once = anonymize_text(&text, &lex);
            prop_assert_eq!(anonymize_text(&once, &lex), once.clone());
            prop_assert!(lexicon_hits(&once, &lex).is_empty(), "{}", once);
        }
    }

    #[test]
    fn total_variant_states_the_distribution() {
        let items = anonymized();
        let t = TemplateSet::default();
        let total = build_difficulty_prompt(&items, PromptVariant::Total, Stage::Direct, None, &t, 10_000).unwrap();
        assert_eq!(total.chunks.len(), 1);
        assert!(total.chunks[0].contains("evenly distributed"));
        assert!(total.payload_digests.is_empty());
        assert!(total.chunks[0].contains("P12:"));
    }

    #[test]
    fn module_settings_need_gaze_data() {
        let items = anonymized();
        let t = TemplateSet::default();
        let err = build_difficulty_prompt(&items, PromptVariant::None, Stage::Horizontal, None, &t, 10_000);
        assert!(matches!(err, Err(DifficultyError::Config(_))));
    }

    fn small_gaze(items: &[QuestionItem]) -> GazeArtifacts {
        let export = generate_export(&ExportConfig {
            students: 1,
            experts: 1,
            min_records: 2,
            max_records: 2,
            defects: DefectCounts::none(),
            ..ExportConfig::default()
        });
        GazeArtifacts::from_table(&export.table, items).unwrap()
    }

    #[test]
    fn combined_none_attaches_both_payload_kinds() {
        let items = anonymized();
        let gaze = small_gaze(&items);
        let t = TemplateSet::default();
        let b = build_difficulty_prompt(&items, PromptVariant::None, Stage::Combined, Some(&gaze), &t, 1_000_000).unwrap();
        assert!(!b.chunks[0].contains("evenly distributed"));
        let expected: Vec<String> = gaze
            .horizontal
            .iter()
            .map(|p| p.digest())
            .chain(gaze.vertical.iter().map(|p| p.digest()))
            .collect();
        assert_eq!(b.payload_digests, expected);
        assert_eq!(gaze.horizontal.len(), 2 * 12 * 2);
        assert!(!ORIGINAL_ID.is_match(&b.chunks[0]));
    }

    #[test]
    fn answers_parse_first_match() {
        let labels: BTreeSet<String> = ["P01", "P02", "P03"].iter().map(|s| s.to_string()).collect();
        let got = parse_levels("P01: Easy\np02 - hard\nP01: medium\nP09: hard\nP03 (Medium)", &labels);
        assert_eq!(got["P01"], DifficultyLevel::Easy);
        assert_eq!(got["P02"], DifficultyLevel::Hard);
        assert_eq!(got["P03"], DifficultyLevel::Medium);
        assert_eq!(got.len(), 3);
    }

    fn scripted_run(items: &[QuestionItem], response: Option<String>, settings: Vec<(Stage, PromptVariant)>) -> DifficultyOutcome {
        let t = TemplateSet::default();
        let mut mock = MockConfig::new(1).with_fallback(MockFallback::Empty);
        if let Some(text) = response {
            for (s, v) in &settings {
                let b = build_difficulty_prompt(items, *v, *s, None, &t, 10_000).unwrap();
                mock = mock.script(sha256_hex(&b.chunks[0]), &text);
            }
        }
        let spec = ModelSpec::with_mock("r1", mock);
        let cfg = DifficultyConfig { settings, ..DifficultyConfig::default() };
        run_and_score(&gateway(), items, &[spec], None, &t, &cfg).unwrap()
    }

    #[test]
    fn six_of_twelve_is_one_half() {
        let items = anonymized();
        let out = scripted_run(&items, Some(answer_sheet(&items, 6)), vec![(Stage::Direct, PromptVariant::Total)]);
        assert_eq!(out.grid.get("Directly(total)", "r1"), Some(0.5));
        assert!(out.grid.to_tsv().contains("Directly(total)\t0.500"));
        assert_eq!(out.runs.len(), 5);
    }

    #[test]
    fn all_correct_is_one() {
        let items = anonymized();
        let out = scripted_run(&items, Some(answer_sheet(&items, 12)), vec![(Stage::Direct, PromptVariant::None)]);
        assert_eq!(out.grid.get("Directly(none)", "r1"), Some(1.0));
    }

    #[test]
    fn nothing_parseable_is_na() {
        let items = anonymized();
        let out = scripted_run(&items, None, vec![(Stage::Direct, PromptVariant::Total)]);
        assert_eq!(out.grid.get("Directly(total)", "r1"), None);
        assert!(out.grid.to_tsv().contains("Directly(total)\tNA"));
        assert!(out.runs.iter().all(|r| r.parsed() == 0 && r.predictions.len() == 12));
    }

    #[test]
    fn cell_is_mean_of_repetitions() {
        let items = anonymized();
        let t = TemplateSet::default();
        let b = build_difficulty_prompt(&items, PromptVariant::Total, Stage::Direct, None, &t, 10_000).unwrap();
        let digest = sha256_hex(&b.chunks[0]);
        let mut mock = MockConfig::new(1).with_fallback(MockFallback::Empty);
        for (rep, correct) in [3usize, 12, 0, 7, 5].iter().enumerate() {
            mock = mock.script(format!("{digest}#{rep}"), answer_sheet(&items, *correct));
        }
        mock = mock.script(format!("{digest}#2"), "no idea");
        let cfg = DifficultyConfig { settings: vec![(Stage::Direct, PromptVariant::Total)], ..DifficultyConfig::default() };
        let out = run_and_score(&gateway(), &items, &[ModelSpec::with_mock("o1", mock)], None, &t, &cfg).unwrap();
        let expected = (3.0 + 12.0 + 0.0 + 7.0 + 5.0) / 12.0 / 5.0;
        assert!((out.grid.get("Directly(total)", "o1").unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn failed_runs_count_as_unparsed() {
        let items = anonymized();
        let mut mock = MockConfig::new(1).with_fallback(MockFallback::LevelGuess);
        mock.fail_runs = (0..5).collect();
        let cfg = DifficultyConfig { settings: vec![(Stage::Direct, PromptVariant::Total)], ..DifficultyConfig::default() };
        let out = run_and_score(&gateway(), &items, &[ModelSpec::with_mock("o1", mock)], None, &TemplateSet::default(), &cfg)
            .unwrap();
        assert_eq!(out.grid.get("Directly(total)", "o1"), None);
        assert!(out.runs.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn full_grid_with_level_guessing_mock() {
        let items = anonymized();
        let gaze = small_gaze(&items);
        let specs: Vec<ModelSpec> = ["gpt4o", "o1", "r1"]
            .iter()
            .map(|m| ModelSpec::with_mock(m, MockConfig::new(4).with_fallback(MockFallback::LevelGuess)))
            .collect();
        let t = TemplateSet::default();
        let a = run_and_score(&gateway(), &items, &specs, Some(&gaze), &t, &DifficultyConfig::default()).unwrap();
        let b = run_and_score(&gateway(), &items, &specs, Some(&gaze), &t, &DifficultyConfig::default()).unwrap();
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.grid.rows, difficulty_rows());
        assert_eq!(a.grid.filled(), 21);
        for v in a.grid.values.iter().flatten() {
            let v = v.unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(a.runs.len(), 7 * 3 * 5);
    }
}

//! The mining grid: every analysis stage at every prompt level on every
//! model, each repeated `n_runs` times. Run outputs are unioned per cell,
//! deduplicated, labeled high or low frequency by how many models produced
//! them, and sampled into a composite set for review.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::digest::{seed_from, short_digest};
use crate::gaze_data::GazeTable;
use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};
use crate::llm_gateway::{parse_patterns, Gateway, GatewayError, ModelSpec, RunFailure};
use crate::segmentation::{
    build_bundle, render_patterns, split_horizontal, split_raw, split_vertical, BundleOptions, Payload, PromptLevel,
    RawLinePayload, SegmentationError, Stage, DEFAULT_CHUNK_BUDGET,
};
use crate::templates::{TemplateSet, TemplateSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyClass {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralPattern {
    /// Digest of the normalized text.
    pub id: String,
    /// Statement as it appeared in the model response.
    pub text: String,
    pub stage: Stage,
    pub prompt_level: PromptLevel,
    pub model_id: String,
    pub run_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_class: Option<FrequencyClass>,
}

impl BehavioralPattern {
    pub fn new(text: impl Into<String>, stage: Stage, prompt_level: PromptLevel, model_id: &str, run_index: u32) -> Self {
        let text = text.into();
        BehavioralPattern {
            id: pattern_id(&text),
            text,
            stage,
            prompt_level,
            model_id: model_id.to_string(),
            run_index,
            frequency_class: None,
        }
    }
}

static LEADING_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\(?\d{1,3}[.):]\s*|[-*•+]\s+)+").expect("valid regex"));

/// Lowercase, whitespace collapsed, leading list markers and trailing
/// punctuation removed.
pub fn normalize(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let stripped = LEADING_MARKER.replace(&collapsed, "");
    stripped.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace()).to_string()
}

pub fn pattern_id(text: &str) -> String {
    short_digest(normalize(text))
}

/// Token-set Jaccard similarity of two normalized statements.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let tokens = |s: &str| -> BTreeSet<String> {
        normalize(s)
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// When two statements count as the same pattern.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Matcher {
    /// Equal ids, i.e. equal normalized text.
    #[default]
    Exact,
    /// Equal ids or token Jaccard at or above the threshold.
    Jaccard { threshold: f64 },
}

impl Matcher {
    pub fn same(&self, a: &BehavioralPattern, b: &BehavioralPattern) -> bool {
        match *self {
            Matcher::Exact => a.id == b.id,
            Matcher::Jaccard { threshold } => a.id == b.id || jaccard(&a.text, &b.text) >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub stage: Stage,
    pub prompt_level: PromptLevel,
    /// Model id, or `merged` for a cross-model union.
    pub model: String,
}

impl CellKey {
    pub fn new(stage: Stage, prompt_level: PromptLevel, model: &str) -> Self {
        CellKey { stage, prompt_level, model: model.to_string() }
    }

    /// `<stage>_<level>_<model>`.
    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}", self.stage.slug(), self.prompt_level.slug(), self.model)
    }

    pub fn parse_stem(stem: &str) -> Option<CellKey> {
        let (stage_slug, rest) = stem.split_once('_')?;
        let stage = Stage::ALL.into_iter().find(|s| s.slug() == stage_slug)?;
        let level = PromptLevel::ALL
            .into_iter()
            .filter(|l| rest.starts_with(&format!("{}_", l.slug())))
            .max_by_key(|l| l.slug().len())?;
        let model = &rest[level.slug().len() + 1..];
        (!model.is_empty()).then(|| CellKey::new(stage, level, model))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub key: CellKey,
    pub patterns: Vec<BehavioralPattern>,
    pub deduped: bool,
}

impl PatternSet {
    pub fn new(key: CellKey, patterns: Vec<BehavioralPattern>) -> Self {
        PatternSet { key, patterns, deduped: false }
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.patterns.iter().map(|p| p.id.as_str()).collect()
    }

    pub fn has_duplicates(&self) -> bool {
        self.ids().len() != self.patterns.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MinerError {
    #[error("frequency classification needs at least 2 model sets, got {0}")]
    TooFewModels(usize),
    #[error("pattern set {0} is not deduplicated")]
    NotDeduped(String),
    #[error("pattern sets mix cells: {0} and {1}")]
    MixedCells(String, String),
    #[error("pattern {0} has no frequency class")]
    Unlabeled(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// First occurrence of every pattern, ordered by run index and then input
/// order.
pub fn dedupe(set: &PatternSet) -> PatternSet {
    dedupe_with(set, Matcher::Exact)
}

pub fn dedupe_with(set: &PatternSet, matcher: Matcher) -> PatternSet {
    let mut ordered: Vec<&BehavioralPattern> = set.patterns.iter().collect();
    ordered.sort_by_key(|p| p.run_index);
    let mut kept: Vec<BehavioralPattern> = Vec::new();
    for p in ordered {
        if !kept.iter().any(|k| matcher.same(k, p)) {
            kept.push(p.clone());
        }
    }
    PatternSet { key: set.key.clone(), patterns: kept, deduped: true }
}

/// Union of per-model sets of one cell with every pattern labeled high when
/// it occurs in two or more model sets and low otherwise. Sets are taken in
/// model-id order so the result does not depend on argument order.
pub fn classify_frequency(sets: &[PatternSet]) -> Result<Vec<BehavioralPattern>, MinerError> {
    classify_frequency_with(sets, Matcher::Exact)
}

pub fn classify_frequency_with(sets: &[PatternSet], matcher: Matcher) -> Result<Vec<BehavioralPattern>, MinerError> {
    let models: BTreeSet<&str> = sets.iter().map(|s| s.key.model.as_str()).collect();
    if models.len() < 2 || models.len() != sets.len() {
        return Err(MinerError::TooFewModels(models.len()));
    }
    if let Some(s) = sets.iter().find(|s| !s.deduped) {
        return Err(MinerError::NotDeduped(s.key.file_stem()));
    }
    let first = &sets[0].key;
    if let Some(s) = sets.iter().find(|s| (s.key.stage, s.key.prompt_level) != (first.stage, first.prompt_level)) {
        return Err(MinerError::MixedCells(first.file_stem(), s.key.file_stem()));
    }
    let mut ordered: Vec<&PatternSet> = sets.iter().collect();
    ordered.sort_by(|a, b| a.key.model.cmp(&b.key.model));

    let mut union: Vec<BehavioralPattern> = Vec::new();
    for set in &ordered {
        for p in &set.patterns {
            if !union.iter().any(|u| matcher.same(u, p)) {
                union.push(p.clone());
            }
        }
    }
    for p in &mut union {
        let count = ordered.iter().filter(|s| s.patterns.iter().any(|q| matcher.same(p, q))).count();
        p.frequency_class = Some(if count >= 2 { FrequencyClass::High } else { FrequencyClass::Low });
    }
    Ok(union)
}

/// ⌈30% · high⌉ in integer arithmetic.
pub fn high_draws(high: usize) -> usize {
    (3 * high).div_ceil(10)
}

/// ⌈10% · low⌉ in integer arithmetic.
pub fn low_draws(low: usize) -> usize {
    low.div_ceil(10)
}

/// Uniform draws without replacement from each frequency class. Sampled
/// patterns keep their relative input order, high class first.
pub fn sample_composite(labeled: &[BehavioralPattern], seed: u64) -> Result<Vec<BehavioralPattern>, MinerError> {
    if let Some(p) = labeled.iter().find(|p| p.frequency_class.is_none()) {
        return Err(MinerError::Unlabeled(p.id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (class, draws) in [(FrequencyClass::High, high_draws as fn(usize) -> usize), (FrequencyClass::Low, low_draws)] {
        let members: Vec<&BehavioralPattern> =
            labeled.iter().filter(|p| p.frequency_class == Some(class)).collect();
        let mut picked = index::sample(&mut rng, members.len(), draws(members.len())).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| members[i].clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MiningConfig {
    /// Repetitions per prompt chunk.
    pub n_runs: u32,
    pub chunk_budget: usize,
    pub matcher: Matcher,
    /// Prompt levels mined for the H, V and HV stages.
    pub levels: Vec<PromptLevel>,
    /// Whether to mine the unsegmented baseline.
    pub include_direct: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            n_runs: 10,
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            matcher: Matcher::Exact,
            levels: PromptLevel::ALL.to_vec(),
            include_direct: true,
        }
    }
}

/// Runs prompts through a gateway and parses the answers.
pub struct Miner<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a TemplateSet,
    pub config: MiningConfig,
}

/// Raw output of one stage on one model, before deduplication.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub set: PatternSet,
    pub failures: Vec<RunFailure>,
}

impl<'a> Miner<'a> {
    pub fn new(gateway: &'a Gateway, templates: &'a TemplateSet, config: MiningConfig) -> Self {
        Miner { gateway, templates, config }
    }

    fn run_bundle<P: Payload>(
        &self,
        payloads: &[P],
        stage: Stage,
        level: PromptLevel,
        spec: &ModelSpec,
        options: BundleOptions<'_>,
    ) -> Result<StageOutput, MinerError> {
        let slot = TemplateSlot::Mining { stage, level };
        let bundle = build_bundle(payloads, slot, self.templates, self.config.chunk_budget, options)?;
        let run = self.gateway.run_repeated(&bundle, spec, self.config.n_runs)?;
        let patterns = run.responses.iter().flat_map(|r| parse_patterns(r, stage, level)).collect();
        Ok(StageOutput {
            set: PatternSet::new(CellKey::new(stage, level, &spec.model_id), patterns),
            failures: run.failures,
        })
    }

    /// One stage with explicitly supplied carried patterns. V expects the
    /// deduplicated H patterns; HV expects both.
    pub fn mine_stage(
        &self,
        table: &GazeTable,
        stage: Stage,
        level: PromptLevel,
        spec: &ModelSpec,
        carried: &[BehavioralPattern],
    ) -> Result<StageOutput, MinerError> {
        match stage {
            Stage::Direct => {
                let (header, lines) = split_raw(table);
                let options = BundleOptions { carried_patterns: None, context: vec![("HEADER", header)] };
                self.run_bundle(&lines, stage, level, spec, options)
            }
            Stage::Horizontal => self.run_bundle(&split_horizontal(table), stage, level, spec, BundleOptions::default()),
            Stage::Vertical => {
                let options = BundleOptions { carried_patterns: Some(carried), context: Vec::new() };
                self.run_bundle(&split_vertical(table)?, stage, level, spec, options)
            }
            Stage::Combined => {
                let options = BundleOptions { carried_patterns: Some(carried), context: Vec::new() };
                self.run_bundle::<RawLinePayload>(&[], stage, level, spec, options)
            }
        }
    }

    /// Union of parsed patterns over all runs of one cell. V runs H first to
    /// obtain its carried patterns; HV runs H and V first.
    pub fn mine_cell(
        &self,
        table: &GazeTable,
        stage: Stage,
        level: PromptLevel,
        spec: &ModelSpec,
    ) -> Result<PatternSet, MinerError> {
        let m = self.config.matcher;
        match stage {
            Stage::Direct | Stage::Horizontal => Ok(self.mine_stage(table, stage, level, spec, &[])?.set),
            Stage::Vertical => {
                let h = dedupe_with(&self.mine_stage(table, Stage::Horizontal, level, spec, &[])?.set, m);
                Ok(self.mine_stage(table, stage, level, spec, &h.patterns)?.set)
            }
            Stage::Combined => {
                let h = dedupe_with(&self.mine_stage(table, Stage::Horizontal, level, spec, &[])?.set, m);
                let v = dedupe_with(&self.mine_stage(table, Stage::Vertical, level, spec, &h.patterns)?.set, m);
                let carried: Vec<_> = h.patterns.into_iter().chain(v.patterns).collect();
                Ok(self.mine_stage(table, stage, level, spec, &carried)?.set)
            }
        }
    }

    /// Every cell of the grid for every model. H and V results of each
    /// (level, model) are reused by the later stages instead of re-mined.
    pub fn mine_grid(&self, table: &GazeTable, models: &[ModelSpec]) -> Result<MiningGrid, MinerError> {
        let m = self.config.matcher;
        let mut grid = MiningGrid::default();
        for spec in models {
            if self.config.include_direct {
                let out = self.mine_stage(table, Stage::Direct, PromptLevel::Detailed, spec, &[])?;
                grid.insert(out);
            }
            for &level in &self.config.levels {
                let h = self.mine_stage(table, Stage::Horizontal, level, spec, &[])?;
                let h_dedup = dedupe_with(&h.set, m);
                let v = self.mine_stage(table, Stage::Vertical, level, spec, &h_dedup.patterns)?;
                let v_dedup = dedupe_with(&v.set, m);
                let carried: Vec<_> = h_dedup.patterns.iter().chain(&v_dedup.patterns).cloned().collect();
                let hv = self.mine_stage(table, Stage::Combined, level, spec, &carried)?;
                grid.insert(h);
                grid.insert(v);
                grid.insert(hv);
            }
        }
        Ok(grid)
    }

    /// Cross-model summary of the deduplicated sets of one cell through the
    /// `inductive` template.
    pub fn induce(&self, sets: &[PatternSet], spec: &ModelSpec) -> Result<PatternSet, MinerError> {
        let first = sets.first().ok_or(MinerError::TooFewModels(0))?;
        let (stage, level) = (first.key.stage, first.key.prompt_level);
        let listing = sets
            .iter()
            .map(|s| format!("Model {}:\n{}", s.key.model, render_patterns(&s.patterns)))
            .collect::<Vec<_>>()
            .join("\n\n");
        let prompt = self.templates.render(TemplateSlot::Inductive, &[("PATTERNS", &listing)]);
        let resp = self.gateway.complete(&prompt, spec, 0)?;
        let patterns = parse_patterns(&resp, stage, level);
        Ok(PatternSet::new(CellKey::new(stage, level, "inductive"), patterns))
    }
}

/// Raw per-model sets of every mined cell plus the failures seen.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningGrid {
    pub sets: BTreeMap<CellKey, PatternSet>,
    pub failures: BTreeMap<CellKey, Vec<RunFailure>>,
}

impl MiningGrid {
    fn insert(&mut self, out: StageOutput) {
        if !out.failures.is_empty() {
            self.failures.insert(out.set.key.clone(), out.failures);
        }
        self.sets.insert(out.set.key.clone(), out.set);
    }

    /// (stage, level) pairs present, in grid order.
    pub fn cells(&self) -> Vec<(Stage, PromptLevel)> {
        let set: BTreeSet<_> = self.sets.keys().map(|k| (k.stage, k.prompt_level)).collect();
        set.into_iter().collect()
    }

    pub fn model_sets(&self, stage: Stage, level: PromptLevel) -> Vec<&PatternSet> {
        self.sets.values().filter(|s| s.key.stage == stage && s.key.prompt_level == level).collect()
    }
}

/// Deduplicated, labeled and sampled view of a mining grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregated {
    /// Deduplicated set per (stage, level, model).
    pub deduped: BTreeMap<CellKey, PatternSet>,
    /// Labeled cross-model union per (stage, level), keyed with model `merged`.
    pub merged: BTreeMap<CellKey, PatternSet>,
    pub composite: Vec<BehavioralPattern>,
}

/// Seed for the composite draw of one cell.
pub fn cell_seed(seed: u64, stage: Stage, level: PromptLevel) -> u64 {
    seed_from(&[&seed.to_string(), stage.slug(), level.slug()])
}

/// Dedupes every set, classifies each (stage, level) across models and draws
/// the composite sample. Cells with a single model are deduplicated but not
/// classified.
pub fn aggregate(grid: &MiningGrid, matcher: Matcher, seed: u64) -> Result<Aggregated, MinerError> {
    let mut out = Aggregated::default();
    for (key, set) in &grid.sets {
        out.deduped.insert(key.clone(), dedupe_with(set, matcher));
    }
    for (stage, level) in grid.cells() {
        let sets: Vec<PatternSet> = out
            .deduped
            .values()
            .filter(|s| s.key.stage == stage && s.key.prompt_level == level)
            .cloned()
            .collect();
        if sets.len() < 2 {
            continue;
        }
        let labeled = classify_frequency_with(&sets, matcher)?;
        out.composite.extend(sample_composite(&labeled, cell_seed(seed, stage, level))?);
        let key = CellKey::new(stage, level, "merged");
        out.merged.insert(key.clone(), PatternSet { key, patterns: labeled, deduped: true });
    }
    Ok(out)
}

/// Writes `<dir>/<stage>_<level>_<model>.jsonl` for every set.
pub fn save_sets<'s>(dir: &Path, sets: impl IntoIterator<Item = &'s PatternSet>) -> Result<(), MinerError> {
    for set in sets {
        write_jsonl(&dir.join(format!("{}.jsonl", set.key.file_stem())), &set.patterns)?;
    }
    Ok(())
}

/// Reads every pattern file in `dir`; a set counts as deduplicated when no
/// id repeats.
pub fn load_sets(dir: &Path) -> Result<Vec<PatternSet>, MinerError> {
    let mut out = Vec::new();
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(out);
    };
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let Some(key) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".jsonl"))
            .and_then(CellKey::parse_stem)
        else {
            continue;
        };
        let patterns = read_jsonl(&path)?;
        let mut set = PatternSet::new(key, patterns);
        set.deduped = !set.has_duplicates();
        out.push(set);
    }
    Ok(out)
}

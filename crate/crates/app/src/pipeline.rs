//! The analysis stages run against one run directory.
//!
//! Each stage reads the artifacts of earlier stages from the run, fails with
//! [`AppError::Precondition`] naming the first missing one, and writes its own
//! artifacts. Stage artifacts carry no timestamps or run ids, so two runs
//! with the same inputs and seed produce byte-identical files; only
//! `manifest.json` differs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use gazelens::anomaly_lstm::{
    build_windows, calibrate_threshold, detect as detect_anomalies, score_windows, summarize_for_llm, train,
    AnomalyReport, DetectConfig, ModelFile, TrainConfig,
};
use gazelens::co_eval::{
    kappa_for_items, score_all, trust_cells, trust_grid, CellKappa, KappaReport, LiteratureEvidence, PatternScore,
    Rater, ReviewVerdict, Verdict,
};
use gazelens::difficulty::{
    anonymize, default_lexicon, default_settings, load_questions, question_corpus, run_and_score, validate_items,
    DifficultyConfig, GazeArtifacts, QuestionItem,
};
use gazelens::gaze_data::{
    annotate_aoi, clean, default_questions, load_aoi_definitions, parse_gaze_csv, sessionize, write_delimited,
    AoiConfig, CleanReport, ColumnSchema, Expertise, GazeTable,
};
use gazelens::grid::ExperimentGrid;
use gazelens::llm_gateway::{ProviderConfig, RunLogEntry};
use gazelens::pattern_miner::{aggregate, load_sets, BehavioralPattern, FrequencyClass, Miner, PatternSet};
use gazelens::segmentation::{payloads_jsonl, split_horizontal, split_vertical, Stage};
use gazelens::synthetic::{generate_export, review_panel, ExportConfig};
use serde::{Deserialize, Serialize};

use crate::config::AppConfig;
use crate::error::AppError;
use crate::store::{self, Run, StageName, StageStatus};

/// Character budget of the anomaly summary prompt.
const SUMMARY_BUDGET: usize = 1_000_000;

/// A run and the configuration its stages use.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: AppConfig,
    pub run: Run,
}

/// Runs `f` between `running` and `done`/`failed` status events.
pub fn tracked<T>(run: &Run, stage: StageName, f: impl FnOnce() -> Result<T, AppError>) -> Result<T, AppError> {
    run.record(stage, StageStatus::Running, None)?;
    match f() {
        Ok(v) => {
            run.record(stage, StageStatus::Done, None)?;
            Ok(v)
        }
        Err(e) => {
            let _ = run.record(stage, StageStatus::Failed, Some(e.to_string()));
            Err(e)
        }
    }
}

fn require(run: &Run, rel: &str, hint: &str) -> Result<PathBuf, AppError> {
    let path = run.path(rel);
    if path.exists() {
        Ok(path)
    } else {
        Err(AppError::precondition(rel, hint))
    }
}

fn read_file_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, AppError> {
    Ok(store::read_jsonl(path)?)
}

fn line_count(run: &Run, rel: &str) -> Result<usize, AppError> {
    Ok(run.read_text(rel)?.lines().filter(|l| !l.trim().is_empty()).count())
}

/// Reads the export, cleans it, labels AOIs and stores the cleaned table.
pub fn ingest(ctx: &Context, input: Option<&Path>, aoi: Option<&Path>) -> Result<String, AppError> {
    let input = input
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.data.input.clone())
        .ok_or_else(|| AppError::Config("no gaze export given; pass --input or set data.input".into()))?;
    let source = File::open(&input).map_err(|e| AppError::Config(format!("cannot open {}: {e}", input.display())))?;
    let table = parse_gaze_csv(std::io::BufReader::new(source), &ctx.config.schema())?;
    let (cleaned, report) = clean(&table, &ctx.config.clean)?;

    let aoi_path = aoi.map(Path::to_path_buf).or_else(|| ctx.config.data.aoi.clone());
    let aoi_config = match &aoi_path {
        Some(p) => AoiConfig::new(load_aoi_definitions(p)?),
        None => {
            log::warn!("no AOI definitions configured; every record gets the default AOI");
            AoiConfig::new(Vec::new())
        }
    };
    let annotated = annotate_aoi(&cleaned, &aoi_config)?;

    let run = &ctx.run;
    run.write_text(store::CLEAN_CSV, &write_delimited(&annotated, annotated.provenance.delimiter))?;
    run.write_json(store::SCHEMA, &annotated.schema)?;
    run.write_json(store::CLEAN_REPORT, &report)?;
    run.register(&[
        ("clean_table", store::CLEAN_CSV),
        ("schema", store::SCHEMA),
        ("clean_report", store::CLEAN_REPORT),
    ])?;
    Ok(format!("ingested {}: {report}", input.display()))
}

/// The cleaned, annotated table of a run.
pub fn load_clean_table(run: &Run) -> Result<GazeTable, AppError> {
    let path = require(run, store::CLEAN_CSV, "run `gazelens ingest` first")?;
    let schema: ColumnSchema = run.read_json(store::SCHEMA)?;
    let file = File::open(&path).map_err(|source| store::StoreError::Io { path: path.clone(), source })?;
    Ok(parse_gaze_csv(std::io::BufReader::new(file), &schema)?)
}

/// Writes the horizontal and vertical payloads of the cleaned table.
pub fn segment(ctx: &Context) -> Result<String, AppError> {
    let table = load_clean_table(&ctx.run)?;
    let horizontal = split_horizontal(&table);
    let vertical = split_vertical(&table)?;
    ctx.run.write_text(store::HORIZONTAL, &payloads_jsonl(&horizontal))?;
    ctx.run.write_text(store::VERTICAL, &payloads_jsonl(&vertical))?;
    ctx.run.register(&[("horizontal_payloads", store::HORIZONTAL), ("vertical_payloads", store::VERTICAL)])?;
    Ok(format!("{} horizontal and {} vertical payloads", horizontal.len(), vertical.len()))
}

fn write_sets<'a>(run: &Run, dir: &str, sets: impl IntoIterator<Item = &'a PatternSet>) -> Result<usize, AppError> {
    let mut n = 0;
    for set in sets {
        run.write_jsonl(&format!("{dir}/{}.jsonl", set.key.file_stem()), &set.patterns)?;
        n += 1;
    }
    Ok(n)
}

/// Mines every grid cell on every model, then deduplicates, classifies and
/// draws the composite sample.
pub fn mine(ctx: &Context) -> Result<String, AppError> {
    let run = &ctx.run;
    require(run, store::HORIZONTAL, "run `gazelens segment` first")?;
    let table = load_clean_table(run)?;
    let gateway = ctx.config.gateway();
    let templates = ctx.config.templates()?;
    let models = ctx.config.effective_models()?;
    let miner = Miner::new(&gateway, &templates, ctx.config.mining.to_mining_config());
    let grid = miner.mine_grid(&table, &models)?;
    let agg = aggregate(&grid, ctx.config.mining.matcher, ctx.config.seed)?;

    let patterns_dir = run.path(store::PATTERNS_DIR);
    if patterns_dir.exists() {
        std::fs::remove_dir_all(&patterns_dir)
            .map_err(|source| store::StoreError::Io { path: patterns_dir.clone(), source })?;
    }
    write_sets(run, store::RAW_PATTERNS_DIR, grid.sets.values())?;
    let sets = write_sets(run, store::PATTERNS_DIR, agg.deduped.values())?;
    write_sets(run, store::MERGED_PATTERNS_DIR, agg.merged.values())?;
    run.write_jsonl(store::COMPOSITE, &agg.composite)?;

    let mut log: Vec<RunLogEntry> = gateway.take_log();
    log.sort_by(|a, b| {
        (&a.model_id, &a.digest, a.run_index, a.chunk_index).cmp(&(&b.model_id, &b.digest, b.run_index, b.chunk_index))
    });
    run.write_jsonl(store::GATEWAY_LOG, &log)?;
    let failures: BTreeMap<String, _> = grid.failures.iter().map(|(k, v)| (k.file_stem(), v)).collect();
    if failures.is_empty() {
        if run.exists(store::MINING_FAILURES) {
            std::fs::remove_file(run.path(store::MINING_FAILURES)).ok();
        }
    } else {
        log::warn!("{} cells had failed runs; see {}", failures.len(), store::MINING_FAILURES);
        run.write_json(store::MINING_FAILURES, &failures)?;
    }
    run.register(&[
        ("patterns", store::PATTERNS_DIR),
        ("raw_patterns", store::RAW_PATTERNS_DIR),
        ("merged_patterns", store::MERGED_PATTERNS_DIR),
        ("composite", store::COMPOSITE),
        ("gateway_log", store::GATEWAY_LOG),
    ])?;
    let high = agg.composite.iter().filter(|p| p.frequency_class == Some(FrequencyClass::High)).count();
    Ok(format!(
        "{sets} pattern sets from {} calls; composite sample of {} ({high} high, {} low frequency)",
        log.len(),
        agg.composite.len(),
        agg.composite.len() - high
    ))
}

/// Composite patterns with duplicates removed, in sample order.
pub fn composite_patterns(run: &Run) -> Result<Vec<BehavioralPattern>, AppError> {
    if !run.exists(store::COMPOSITE) {
        return Ok(Vec::new());
    }
    let all: Vec<BehavioralPattern> = run.read_jsonl(store::COMPOSITE)?;
    let mut seen = BTreeSet::new();
    Ok(all.into_iter().filter(|p| seen.insert(p.id.clone())).collect())
}

fn evidence_by_pattern(run: &Run) -> Result<BTreeMap<String, Vec<LiteratureEvidence>>, AppError> {
    let mut out: BTreeMap<String, Vec<LiteratureEvidence>> = BTreeMap::new();
    if run.exists(store::EVIDENCE) {
        for e in run.read_jsonl::<LiteratureEvidence>(store::EVIDENCE)? {
            out.entry(e.pattern_id.clone()).or_default().push(e);
        }
    }
    Ok(out)
}

/// Scores the literature evidence of the composite patterns and records the
/// resulting literature verdicts.
pub fn score(ctx: &Context, evidence: Option<&Path>) -> Result<String, AppError> {
    let run = &ctx.run;
    require(run, store::COMPOSITE, "run `gazelens mine` first")?;
    if let Some(path) = evidence {
        let records: Vec<LiteratureEvidence> = read_file_jsonl(path)?;
        run.write_jsonl(store::EVIDENCE, &records)?;
    }
    require(run, store::EVIDENCE, "pass --evidence FILE with five ranked papers per pattern")?;
    let records: Vec<LiteratureEvidence> = run.read_jsonl(store::EVIDENCE)?;
    let composite: BTreeSet<String> = composite_patterns(run)?.into_iter().map(|p| p.id).collect();
    let (known, unknown): (Vec<_>, Vec<_>) = records.into_iter().partition(|e| composite.contains(&e.pattern_id));
    if !unknown.is_empty() {
        let ids: BTreeSet<&str> = unknown.iter().map(|e| e.pattern_id.as_str()).collect();
        log::warn!("ignoring evidence for {} patterns outside the composite sample", ids.len());
    }
    let scores = score_all(&known)?;
    run.write_jsonl(store::SCORES, &scores)?;

    let verdicts = scores
        .iter()
        .map(|s| ReviewVerdict {
            pattern_id: s.pattern_id.clone(),
            rater: Rater::Literature,
            verdict: s.literature_verdict,
            timestamp: 0,
            note: s.tied.then(|| "tied".to_string()),
        })
        .collect();
    run.submit_verdicts(verdicts)?;
    run.register(&[("evidence", store::EVIDENCE), ("scores", store::SCORES), ("verdicts", store::VERDICTS)])?;

    let valid = scores.iter().filter(|s| s.literature_verdict == Verdict::Valid).count();
    let tied = scores.iter().filter(|s| s.tied).count();
    Ok(format!(
        "scored {} patterns: {valid} valid, {} invalid ({tied} tied); {} composite patterns without evidence",
        scores.len(),
        scores.len() - valid,
        composite.len() - scores.len()
    ))
}

/// Kappa over the composite sample plus the per-cell consistency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub composite_patterns: usize,
    pub expert_verdicts: usize,
    pub literature_verdicts: usize,
    /// Composite patterns judged by both raters.
    pub paired: usize,
    pub overall: Option<KappaReport>,
    pub cells: Vec<CellKappa>,
    pub grid: ExperimentGrid,
}

/// Computes kappa from the current verdicts of a run.
pub fn compute_kappa(run: &Run, config: &AppConfig) -> Result<KappaSummary, AppError> {
    let composite = composite_patterns(run)?;
    let log = run.verdict_log()?;
    let expert = log.current(Rater::Expert);
    let literature = log.current(Rater::Literature);
    let ids: Vec<&str> = composite.iter().map(|p| p.id.as_str()).collect();
    let paired = ids.iter().filter(|id| expert.contains_key(**id) && literature.contains_key(**id)).count();
    let overall = kappa_for_items(&ids, &expert, &literature);

    let sets = load_sets(&run.path(store::PATTERNS_DIR))?;
    let refs: Vec<&PatternSet> = sets.iter().collect();
    let cells = trust_cells(&refs, &expert, &literature, |m| config.column_of(m));
    let grid = trust_grid(&cells, &config.columns()?);
    Ok(KappaSummary {
        composite_patterns: composite.len(),
        expert_verdicts: expert.len(),
        literature_verdicts: literature.len(),
        paired,
        overall,
        cells,
        grid,
    })
}

/// Imports expert verdicts if given, then writes the kappa and consistency
/// reports.
pub fn kappa(ctx: &Context, verdicts: Option<&Path>) -> Result<String, AppError> {
    let run = &ctx.run;
    let mut imported = String::new();
    if let Some(path) = verdicts {
        let records: Vec<ReviewVerdict> = read_file_jsonl(path)?;
        if let Some(v) = records.iter().find(|v| v.rater != Rater::Expert) {
            return Err(AppError::Validation(format!(
                "{}: verdict for {} is not an expert verdict; literature verdicts come from `gazelens score`",
                path.display(),
                v.pattern_id
            )));
        }
        let outcomes = run.submit_verdicts(records)?;
        let changed = outcomes.iter().filter(|o| !matches!(o, gazelens::co_eval::SubmitOutcome::Unchanged)).count();
        imported = format!("imported {changed} of {} expert verdicts; ", outcomes.len());
    }
    let log = run.verdict_log()?;
    if !log.entries.iter().any(|v| v.rater == Rater::Expert) {
        return Err(AppError::precondition(
            store::VERDICTS,
            "no expert verdicts recorded; pass --verdicts FILE or post them to the review service",
        ));
    }
    if !log.entries.iter().any(|v| v.rater == Rater::Literature) {
        return Err(AppError::precondition(store::SCORES, "no literature verdicts; run `gazelens score` first"));
    }
    require(run, store::COMPOSITE, "run `gazelens mine` first")?;
    let summary = compute_kappa(run, &ctx.config)?;
    run.write_json(store::KAPPA, &summary)?;
    run.write_text(store::CONSISTENCY, &summary.grid.to_tsv())?;
    run.register(&[("kappa", store::KAPPA), ("consistency", store::CONSISTENCY)])?;
    let overall = match &summary.overall {
        Some(r) => format!("kappa {:.3} over {} patterns ({})", r.kappa, r.n, if r.consistent { "consistent" } else { "not consistent" }),
        None => "kappa undefined".to_string(),
    };
    let cells = summary.grid.rows.len() * summary.grid.columns.len();
    Ok(format!("{imported}{overall}; {} of {cells} grid cells filled", summary.grid.filled()))
}

/// Trains the autoencoder on expert windows and flags student windows.
pub fn detect(ctx: &Context) -> Result<String, AppError> {
    let run = &ctx.run;
    let cfg = &ctx.config.anomaly;
    let table = load_clean_table(run)?;
    let sessions = sessionize(&table);
    let experts = build_windows(sessions.by_expertise(Expertise::Expert), cfg.window_len, cfg.stride)?;
    if experts.windows.is_empty() {
        return Err(AppError::Validation(format!(
            "no expert sequence reaches the window length {}",
            cfg.window_len
        )));
    }
    let train_cfg = TrainConfig {
        hidden_dim: cfg.hidden_dim,
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        clip_norm: cfg.clip_norm,
        seed: ctx.config.seed,
    };
    let model = train(&experts.windows, &train_cfg)?;
    run.write_json(store::MODEL, &ModelFile::from(&model))?;
    let threshold = calibrate_threshold(&score_windows(&model, &experts.windows)?, cfg.k)?;

    let all_students: BTreeSet<&str> =
        sessions.by_expertise(Expertise::Student).map(|s| s.key.participant_id.as_str()).collect();
    if let Some(unknown) = cfg.students.iter().find(|s| !all_students.contains(s.as_str())) {
        return Err(AppError::Validation(format!("student {unknown} has no gaze records")));
    }
    let chosen = sessions
        .by_expertise(Expertise::Student)
        .filter(|s| cfg.students.is_empty() || cfg.students.contains(&s.key.participant_id));
    let students = build_windows(chosen, cfg.window_len, cfg.stride)?;
    let detect_cfg = DetectConfig { questions: question_order(&ctx.config), top_n: cfg.top_n, ..DetectConfig::default() };
    let report = detect_anomalies(&model, threshold, &students.windows, &detect_cfg)?;
    run.write_json(store::ANOMALIES, &report)?;
    let prompt = summarize_for_llm(&report, &ctx.config.templates()?, SUMMARY_BUDGET)?;
    run.write_text(store::ANOMALY_PROMPT, &prompt.chunks.join("\n\n"))?;
    run.register(&[("model", store::MODEL), ("anomalies", store::ANOMALIES), ("anomaly_prompt", store::ANOMALY_PROMPT)])?;
    Ok(format!(
        "trained on {} expert windows, loss {:.4} -> {:.4}; threshold {threshold:.4}; flagged {} of {} student windows",
        experts.windows.len(),
        model.initial_loss().unwrap_or(f64::NAN),
        model.final_loss().unwrap_or(f64::NAN),
        report.summary.flagged,
        report.summary.total_windows
    ))
}

/// Task questions in presentation order, then any further configured ids.
fn question_order(config: &AppConfig) -> Vec<String> {
    let defaults = default_questions();
    match &config.clean.questions {
        Some(q) => {
            let mut out: Vec<String> = defaults.iter().filter(|d| q.contains(*d)).cloned().collect();
            out.extend(q.iter().filter(|x| !defaults.contains(x)).cloned());
            out
        }
        None => defaults,
    }
}

/// Runs the question-difficulty grid and writes its reports.
pub fn predict_difficulty(ctx: &Context) -> Result<String, AppError> {
    let run = &ctx.run;
    let cfg = &ctx.config.difficulty;
    let items: Vec<QuestionItem> = match &cfg.questions {
        Some(p) => load_questions(p)?,
        None => question_corpus(),
    };
    validate_items(&items)?;
    let lexicon = cfg.lexicon.clone().unwrap_or_else(default_lexicon);
    let anonymized = anonymize(&items, &lexicon, ctx.config.seed);
    let settings = default_settings();
    let gaze = if settings.iter().any(|(s, _)| *s != Stage::Direct) {
        Some(GazeArtifacts::from_table(&load_clean_table(run)?, &anonymized)?)
    } else {
        None
    };
    let mut specs = ctx.config.effective_models()?;
    for spec in &mut specs {
        if let ProviderConfig::Mock(mock) = &mut spec.provider {
            mock.fallback = cfg.mock_fallback;
        }
    }
    let difficulty_cfg = DifficultyConfig { repetitions: cfg.repetitions, settings, budget: cfg.budget };
    let outcome = run_and_score(
        &ctx.config.gateway(),
        &anonymized,
        &specs,
        gaze.as_ref(),
        &ctx.config.templates()?,
        &difficulty_cfg,
    )?;
    run.write_json(store::DIFFICULTY, &outcome.grid)?;
    run.write_text(store::DIFFICULTY_TSV, &outcome.grid.to_tsv())?;
    run.write_jsonl(store::DIFFICULTY_RUNS, &outcome.runs)?;
    run.write_json(store::QUESTIONS, &anonymized)?;
    run.register(&[
        ("difficulty", store::DIFFICULTY),
        ("difficulty_table", store::DIFFICULTY_TSV),
        ("difficulty_runs", store::DIFFICULTY_RUNS),
        ("questions", store::QUESTIONS),
    ])?;
    let cells = outcome.grid.rows.len() * outcome.grid.columns.len();
    Ok(format!(
        "{} prediction runs; {} of {cells} cells filled, {} NA",
        outcome.runs.len(),
        outcome.grid.filled(),
        cells - outcome.grid.filled()
    ))
}

/// Collects whatever reports the run has into `reports/summary.md`.
pub fn report(ctx: &Context) -> Result<String, AppError> {
    let run = &ctx.run;
    let mut out = String::from("# Run summary\n\n");
    out.push_str(&format!("seed: {}\n", ctx.config.seed));
    let mut sections = 0;

    out.push_str("\n## Gaze data\n\n");
    if run.exists(store::CLEAN_REPORT) {
        let r: CleanReport = run.read_json(store::CLEAN_REPORT)?;
        out.push_str(&format!(
            "rows in {}, rows out {}; dropped {} missing, {} noise, {} irrelevant\n",
            r.rows_in, r.rows_out, r.dropped_missing, r.dropped_noise, r.dropped_irrelevant
        ));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    out.push_str("\n## Segmentation\n\n");
    if run.exists(store::HORIZONTAL) && run.exists(store::VERTICAL) {
        out.push_str(&format!(
            "{} horizontal payloads, {} vertical payloads\n",
            line_count(run, store::HORIZONTAL)?,
            line_count(run, store::VERTICAL)?
        ));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    out.push_str("\n## Pattern mining\n\n");
    if run.exists(store::COMPOSITE) {
        let sets = load_sets(&run.path(store::PATTERNS_DIR))?;
        let patterns: usize = sets.iter().map(|s| s.patterns.len()).sum();
        let composite: Vec<BehavioralPattern> = run.read_jsonl(store::COMPOSITE)?;
        let high = composite.iter().filter(|p| p.frequency_class == Some(FrequencyClass::High)).count();
        out.push_str(&format!(
            "{} deduplicated sets holding {patterns} patterns; composite sample {} ({high} high, {} low)\n",
            sets.len(),
            composite.len(),
            composite.len() - high
        ));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    out.push_str("\n## Co-evaluation\n\n");
    if run.exists(store::KAPPA) {
        let k: KappaSummary = run.read_json(store::KAPPA)?;
        match &k.overall {
            Some(r) => out.push_str(&format!(
                "kappa {:.3} over {} patterns (p_o {:.3}, p_e {:.3}); {}\n",
                r.kappa,
                r.n,
                r.p_o,
                r.p_e,
                if r.consistent { "consistent" } else { "not consistent" }
            )),
            None => out.push_str("kappa undefined\n"),
        }
        out.push_str(&format!("\n```\n{}```\n", k.grid.to_tsv()));
        sections += 1;
    } else if run.exists(store::SCORES) {
        let scores: Vec<PatternScore> = run.read_jsonl(store::SCORES)?;
        out.push_str(&format!("{} patterns scored; kappa not run\n", scores.len()));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    out.push_str("\n## Anomalies\n\n");
    if run.exists(store::ANOMALIES) {
        let r: AnomalyReport = run.read_json(store::ANOMALIES)?;
        let s = &r.summary;
        out.push_str(&format!(
            "threshold {:.4}; {} of {} student windows flagged\n",
            s.threshold, s.flagged, s.total_windows
        ));
        for (student, agg) in &s.per_student {
            let top: Vec<String> = agg.top_questions.iter().map(|(q, n)| format!("{q} ({n})")).collect();
            out.push_str(&format!("- {student}: {} flagged; top questions {}\n", agg.flagged, top.join(", ")));
        }
        let double_zero = if s.double_zero.is_empty() { "none".to_string() } else { s.double_zero.join(", ") };
        out.push_str(&format!("- double-zero questions: {double_zero}\n"));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    out.push_str("\n## Difficulty prediction\n\n");
    if run.exists(store::DIFFICULTY_TSV) {
        out.push_str(&format!("```\n{}```\n", run.read_text(store::DIFFICULTY_TSV)?));
        sections += 1;
    } else {
        out.push_str("not run\n");
    }

    run.write_text(store::SUMMARY, &out)?;
    run.register(&[("summary", store::SUMMARY)])?;
    Ok(format!("summary of {sections} sections written to {}", run.path(store::SUMMARY).display()))
}

/// One pattern as shown to the reviewing expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub run_id: String,
    pub pattern: BehavioralPattern,
    pub evidence: Vec<LiteratureEvidence>,
    /// Per-paper scores and total; absent until five papers are on file.
    pub score: Option<PatternScore>,
    pub literature_verdict: Option<Verdict>,
    pub expert_verdict: Option<ReviewVerdict>,
    /// Every verdict for the pattern, oldest first.
    pub history: Vec<ReviewVerdict>,
}

impl ReviewItem {
    pub fn reviewed(&self) -> bool {
        self.expert_verdict.is_some()
    }
}

/// Review items of every composite pattern, in sample order.
pub fn review_items(run: &Run) -> Result<Vec<ReviewItem>, AppError> {
    let composite = composite_patterns(run)?;
    let mut evidence = evidence_by_pattern(run)?;
    let log = run.verdict_log()?;
    Ok(composite
        .into_iter()
        .map(|pattern| {
            let mut ev = evidence.remove(&pattern.id).unwrap_or_default();
            ev.sort_by_key(|e| e.rank);
            let score = gazelens::co_eval::score_pattern(&ev).ok();
            ReviewItem {
                run_id: run.id.clone(),
                literature_verdict: log.current_for(&pattern.id, Rater::Literature).map(|v| v.verdict),
                expert_verdict: log.current_for(&pattern.id, Rater::Expert).cloned(),
                history: log.history(&pattern.id).into_iter().cloned().collect(),
                evidence: ev,
                score,
                pattern,
            }
        })
        .collect())
}

pub fn review_item(run: &Run, pattern_id: &str) -> Result<Option<ReviewItem>, AppError> {
    Ok(review_items(run)?.into_iter().find(|i| i.pattern.id == pattern_id))
}

/// Writes a synthetic gaze export with its AOIs, questions and a config
/// file pointing at them.
pub fn synth_data(out: &Path, seed: u64) -> Result<String, AppError> {
    let io = |path: PathBuf| move |source| store::StoreError::Io { path, source };
    std::fs::create_dir_all(out).map_err(io(out.to_path_buf()))?;
    let export = generate_export(&ExportConfig { seed, ..ExportConfig::default() });
    store::write_atomic(&out.join("gaze.csv"), write_delimited(&export.table, Default::default()).as_bytes())?;
    store::write_json(&out.join("aoi.json"), &export.aoi)?;
    store::write_json(&out.join("questions.json"), &question_corpus())?;
    store::write_json(&out.join("export_manifest.json"), &export.manifest)?;

    let mut cfg = AppConfig { seed, ..AppConfig::default() };
    cfg.data.input = Some("gaze.csv".into());
    cfg.data.aoi = Some("aoi.json".into());
    cfg.difficulty.questions = Some("questions.json".into());
    cfg.mining.chunk_budget = 400_000;
    cfg.anomaly.window_len = 16;
    cfg.anomaly.stride = 8;
    cfg.anomaly.epochs = 60;
    store::write_atomic(&out.join(crate::config::DEFAULT_CONFIG_FILE), cfg.to_toml().as_bytes())?;
    Ok(format!(
        "wrote {} rows for {} participants to {}",
        export.manifest.total_rows,
        export.manifest.participants.len(),
        out.display()
    ))
}

/// Writes literature evidence and expert verdicts for the composite sample
/// of a run, standing in for a literature search and an expert session.
pub fn synth_panel(run: &Run, out: &Path, seed: u64, agreement: f64) -> Result<String, AppError> {
    require(run, store::COMPOSITE, "run `gazelens mine` first")?;
    if !(0.0..=1.0).contains(&agreement) {
        return Err(AppError::Validation(format!("agreement {agreement} outside [0, 1]")));
    }
    let mut ids: Vec<String> = composite_patterns(run)?.into_iter().map(|p| p.id).collect();
    ids.sort();
    let panel = review_panel(&ids, seed, agreement);
    store::write_jsonl(&out.join("evidence.jsonl"), &panel.evidence)?;
    store::write_jsonl(&out.join("expert_verdicts.jsonl"), &panel.expert)?;
    Ok(format!(
        "wrote evidence and expert verdicts for {} patterns to {}",
        ids.len(),
        out.display()
    ))
}

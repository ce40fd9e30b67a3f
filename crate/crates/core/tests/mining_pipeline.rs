use std::collections::BTreeSet;

use gazelens::co_eval::{score_all, trust_cells, trust_grid, Rater, VerdictLog};
use gazelens::gaze_data::{clean, CleanConfig};
use gazelens::grid::DEFAULT_COLUMNS;
use gazelens::llm_gateway::{Gateway, ModelSpec, RetryPolicy};
use gazelens::pattern_miner::{aggregate, high_draws, low_draws, FrequencyClass, Matcher, Miner, MiningConfig};
use gazelens::segmentation::{PromptLevel, Stage};
use gazelens::synthetic::{generate_export, review_panel, DefectCounts, ExportConfig};
use gazelens::templates::TemplateSet;

fn small_table() -> gazelens::gaze_data::GazeTable {
    let export = generate_export(&ExportConfig {
        students: 2,
        experts: 2,
        min_records: 2,
        max_records: 3,
        defects: DefectCounts::none(),
        ..ExportConfig::default()
    });
    clean(&export.table, &CleanConfig::default()).unwrap().0
}

fn gateway() -> Gateway {
    Gateway::new(RetryPolicy { max_attempts: 2, base_delay_ms: 0 }, 8)
}

#[test]
fn grid_mining_with_mock_models() {
    let table = small_table();
    let gw = gateway();
    let templates = TemplateSet::default();
    let miner = Miner::new(&gw, &templates, MiningConfig { chunk_budget: 6000, ..MiningConfig::default() });
    let models = ModelSpec::mock_trio(7);
    let grid = miner.mine_grid(&table, &models).unwrap();

    // direct + 3 levels × (h, v, hv), per model
    assert_eq!(grid.sets.len(), 3 * (1 + 3 * 3));
    let log = gw.log_entries();
    assert_eq!(log.iter().map(|e| e.run_index).max(), Some(9));
    assert!(log.iter().all(|e| e.ok));

    // combined prompts list the h patterns they build on
    let h = &grid.sets.values().find(|s| s.key.stage == Stage::Horizontal && s.key.model == "gpt4o").unwrap();
    let hv = &grid.sets.values().find(|s| s.key.stage == Stage::Combined && s.key.model == "gpt4o").unwrap();
    assert!(!h.patterns.is_empty() && !hv.patterns.is_empty());

    let agg = aggregate(&grid, Matcher::Exact, 7).unwrap();
    for merged in agg.merged.values() {
        let high = merged.patterns.iter().filter(|p| p.frequency_class == Some(FrequencyClass::High)).count();
        let low = merged.patterns.len() - high;
        let drawn: Vec<_> = agg
            .composite
            .iter()
            .filter(|p| p.stage == merged.key.stage && p.prompt_level == merged.key.prompt_level)
            .collect();
        assert_eq!(drawn.len(), high_draws(high) + low_draws(low));
    }

    let again = Miner::new(&gateway(), &templates, MiningConfig { chunk_budget: 6000, ..MiningConfig::default() })
        .mine_grid(&table, &models)
        .unwrap();
    assert_eq!(again, grid);
}

#[test]
fn combined_prompts_carry_horizontal_ids() {
    let table = small_table();
    let gw = gateway();
    let templates = TemplateSet::default();
    let miner = Miner::new(&gw, &templates, MiningConfig { n_runs: 3, chunk_budget: 6000, ..MiningConfig::default() });
    let spec = ModelSpec::mock("o1", 2);
    let h = miner.mine_stage(&table, Stage::Horizontal, PromptLevel::Brief, &spec, &[]).unwrap().set;
    let carried: Vec<_> = h.patterns.iter().map(|p| {
        let mut v = p.clone();
        v.stage = Stage::Vertical;
        v
    }).chain(h.patterns.iter().cloned()).collect();
    gw.take_log();
    miner.mine_stage(&table, Stage::Combined, PromptLevel::Brief, &spec, &carried).unwrap();
    assert_eq!(gw.log_entries().len(), 3);

    let slot = gazelens::templates::TemplateSlot::Mining { stage: Stage::Combined, level: PromptLevel::Brief };
    let bundle = gazelens::segmentation::build_bundle::<gazelens::segmentation::RawLinePayload>(
        &[],
        slot,
        &templates,
        6000,
        gazelens::segmentation::BundleOptions { carried_patterns: Some(&carried), context: vec![] },
    )
    .unwrap();
    for p in &h.patterns {
        assert!(bundle.chunks[0].contains(&p.id));
    }
    let digest = gazelens::digest::sha256_hex(&bundle.chunks[0]);
    assert!(gw.log_entries().iter().all(|e| e.digest == digest));
}

#[test]
fn review_panel_feeds_the_trust_grid() {
    let table = small_table();
    let gw = gateway();
    let templates = TemplateSet::default();
    let config = MiningConfig { chunk_budget: 6000, levels: vec![PromptLevel::Detailed], ..MiningConfig::default() };
    let grid = Miner::new(&gw, &templates, config).mine_grid(&table, &ModelSpec::mock_trio(3)).unwrap();
    let agg = aggregate(&grid, Matcher::Exact, 3).unwrap();
    let ids: Vec<String> = agg.composite.iter().map(|p| p.id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let panel = review_panel(&ids, 5, 0.85);

    let scores = score_all(&panel.evidence).unwrap();
    assert_eq!(scores.len(), ids.len());
    let mut log = VerdictLog::default();
    for v in &panel.expert {
        log.submit(v.clone());
    }
    for s in &scores {
        log.submit(gazelens::co_eval::ReviewVerdict {
            pattern_id: s.pattern_id.clone(),
            rater: Rater::Literature,
            verdict: s.literature_verdict,
            timestamp: 0,
            note: None,
        });
    }
    let deduped: Vec<_> = agg.deduped.values().collect();
    let columns: Vec<String> = DEFAULT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let cells = trust_cells(&deduped, &log.current(Rater::Expert), &log.current(Rater::Literature), |m| {
        gazelens::llm_gateway::default_label(m)
    });
    let table2 = trust_grid(&cells, &columns);
    assert_eq!(table2.rows.len(), 10);
    assert!(table2.to_tsv().starts_with("setting\t4o\to1\tr1\n"));
    for v in table2.values.iter().flatten().flatten() {
        assert!((-1.0..=1.0).contains(v));
    }
}

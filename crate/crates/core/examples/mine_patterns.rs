//! Mine behavioral patterns across the stage, prompt level and model grid
//! with deterministic mock models, then deduplicate, classify by frequency
//! and draw the composite sample.
//!
//!     cargo run -p gazelens --example mine_patterns

use gazelens::gaze_data::{clean, CleanConfig};
use gazelens::llm_gateway::{Gateway, ModelSpec, RetryPolicy};
use gazelens::pattern_miner::{aggregate, FrequencyClass, Matcher, Miner, MiningConfig};
use gazelens::synthetic::{generate_export, DefectCounts, ExportConfig};
use gazelens::templates::TemplateSet;

fn main() {
    let export = generate_export(&ExportConfig {
        students: 2,
        experts: 2,
        min_records: 2,
        max_records: 3,
        defects: DefectCounts::none(),
        ..ExportConfig::default()
    });
    let (table, _) = clean(&export.table, &CleanConfig::default()).expect("clean");

    let gateway = Gateway::new(RetryPolicy { max_attempts: 2, base_delay_ms: 0 }, 8);
    let templates = TemplateSet::default();
    let miner = Miner::new(&gateway, &templates, MiningConfig { chunk_budget: 6000, ..MiningConfig::default() });
    let grid = miner.mine_grid(&table, &ModelSpec::mock_trio(7)).expect("mining");
    println!("{} pattern sets from {} model calls", grid.sets.len(), gateway.log_entries().len());

    let agg = aggregate(&grid, Matcher::Exact, 7).expect("aggregate");
    for merged in agg.merged.values() {
        let high = merged.patterns.iter().filter(|p| p.frequency_class == Some(FrequencyClass::High)).count();
        println!(
            "{} / {}: {} merged patterns, {high} high frequency",
            merged.key.stage.label(),
            merged.key.prompt_level.label(),
            merged.patterns.len()
        );
    }
    println!("composite sample of {} patterns:", agg.composite.len());
    for p in agg.composite.iter().take(5) {
        println!("  [{}] {}", &p.id[..8], p.text);
    }
}

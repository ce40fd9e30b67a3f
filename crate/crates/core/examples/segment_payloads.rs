//! Split a cleaned gaze table into row payloads and id/column payloads, then
//! pack them into prompt chunks under a character budget.
//!
//!     cargo run -p gazelens --example segment_payloads

use gazelens::gaze_data::{clean, CleanConfig};
use gazelens::segmentation::{build_bundle, split_horizontal, split_vertical, BundleOptions, PromptLevel, Stage};
use gazelens::synthetic::{generate_export, DefectCounts, ExportConfig};
use gazelens::templates::{TemplateSet, TemplateSlot};

fn main() {
    let export = generate_export(&ExportConfig {
        students: 2,
        experts: 2,
        min_records: 4,
        max_records: 6,
        defects: DefectCounts::none(),
        ..ExportConfig::default()
    });
    let (table, _) = clean(&export.table, &CleanConfig::default()).expect("clean");

    let rows = split_horizontal(&table);
    let columns = split_vertical(&table).expect("vertical split");
    println!("{} rows -> {} row payloads, {} column payloads", table.len(), rows.len(), columns.len());

    let templates = TemplateSet::default();
    for (stage, payloads) in [(Stage::Horizontal, rows.len()), (Stage::Vertical, columns.len())] {
        let slot = TemplateSlot::Mining { stage, level: PromptLevel::Brief };
        let bundle = match stage {
            Stage::Horizontal => build_bundle(&rows, slot, &templates, 4000, BundleOptions::default()),
            _ => build_bundle(&columns, slot, &templates, 40_000, BundleOptions::default()),
        }
        .expect("bundle");
        let sizes: Vec<usize> = bundle.chunks.iter().map(String::len).collect();
        println!("{}: {payloads} payloads in {} chunks, sizes {sizes:?}", stage.label(), bundle.chunks.len());
    }
}

//! Generate a synthetic gaze export with injected defects, then parse, clean,
//! annotate areas of interest and group the records into sessions.
//!
//!     cargo run -p gazelens --example ingest_clean

use gazelens::gaze_data::{
    annotate_aoi, clean, parse_gaze_csv, sessionize, write_delimited, CleanConfig, ColumnSchema, Delimiter,
};
use gazelens::synthetic::{generate_export, synthetic_aoi_config, ExportConfig};

fn main() {
    let export = generate_export(&ExportConfig::default());
    let csv = write_delimited(&export.table, Delimiter::Comma);
    println!("export: {} rows, {} bytes of CSV", export.manifest.total_rows, csv.len());

    let table = parse_gaze_csv(csv.as_bytes(), &ColumnSchema::default()).expect("parse");
    let (cleaned, report) = clean(&table, &CleanConfig::default()).expect("clean");
    println!("{report}");

    let annotated = annotate_aoi(&cleaned, &synthetic_aoi_config(&export.manifest.questions)).expect("annotate");
    let errors = annotated
        .records
        .iter()
        .filter(|r| r.aoi.as_ref().is_some_and(|a| a.category == gazelens::gaze_data::AoiCategory::Error))
        .count();
    println!("{errors} of {} records fall inside an error region", annotated.len());

    let sessions = sessionize(&annotated);
    println!("{} participant-question sequences, {} records", sessions.len(), sessions.total_records());
}

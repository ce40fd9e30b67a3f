use std::collections::BTreeSet;

use gazelens::gaze_data::{
    annotate_aoi, clean, parse_gaze_csv, sessionize, write_delimited, AoiCategory, CleanConfig, ColumnSchema, Delimiter,
    SequenceKey,
};
use gazelens::synthetic::{generate_export, synthetic_aoi_config, ExportConfig};
use proptest::prelude::*;

#[test]
fn csv_export_round_trip_matches_manifest() {
    let export = generate_export(&ExportConfig::default());
    let csv = write_delimited(&export.table, Delimiter::Comma);
    let table = parse_gaze_csv(csv.as_bytes(), &ColumnSchema::default()).unwrap();
    assert_eq!(table.len(), export.manifest.total_rows);

    let ids: BTreeSet<String> = table.records.iter().filter_map(|r| r.participant_id.clone()).collect();
    assert_eq!(ids.len(), 19);
    assert_eq!(ids, export.manifest.participant_ids());

    let (cleaned, report) = clean(&table, &CleanConfig::default()).unwrap();
    assert_eq!(report.rows_out + report.dropped(), report.rows_in);
    assert_eq!(report.rows_out, export.manifest.clean_rows);

    let annotated = annotate_aoi(&cleaned, &synthetic_aoi_config(&export.manifest.questions)).unwrap();
    let sessions = sessionize(&annotated);
    assert_eq!(sessions.len(), 19 * 12);
    assert_eq!(sessions.total_records(), annotated.len());
    for s in &export.manifest.sequences {
        let key = SequenceKey { participant_id: s.participant_id.clone(), question_id: s.question_id.clone() };
        assert_eq!(sessions.sequences[&key].len(), s.records);
    }
}

#[test]
fn cleaning_is_idempotent_on_the_export() {
    let export = generate_export(&ExportConfig::default());
    let (once, _) = clean(&export.table, &CleanConfig::default()).unwrap();
    let (twice, report) = clean(&once, &CleanConfig::default()).unwrap();
    assert_eq!(once.records, twice.records);
    assert_eq!(report.dropped(), 0);
}

fn brute_force(x: f64, y: f64) -> AoiCategory {
    if (0.05..=0.95).contains(&x) && (0.55..=0.95).contains(&y) {
        AoiCategory::Error
    } else {
        AoiCategory::NonError
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn annotation_matches_point_in_rect(seed in any::<u64>()) {
        let export = generate_export(&ExportConfig {
            seed,
            students: 2,
            experts: 2,
            min_records: 3,
            max_records: 8,
            defects: gazelens::synthetic::DefectCounts::none(),
            ..ExportConfig::default()
        });
        let annotated = annotate_aoi(&export.table, &synthetic_aoi_config(&export.manifest.questions)).unwrap();
        for r in &annotated.records {
            let expected = brute_force(r.gaze_x.unwrap(), r.gaze_y.unwrap());
            prop_assert_eq!(r.aoi.as_ref().unwrap().category, expected);
        }
    }
}

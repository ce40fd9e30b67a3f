//! Anonymize the question corpus, ask mock models to rate each question's
//! difficulty under every prompting setting and print the accuracy grid.
//!
//!     cargo run -p gazelens --example predict_difficulty

use gazelens::difficulty::{
    anonymize, default_lexicon, question_corpus, run_and_score, DifficultyConfig, GazeArtifacts,
};
use gazelens::gaze_data::{clean, CleanConfig};
use gazelens::llm_gateway::{Gateway, MockConfig, MockFallback, ModelSpec, RetryPolicy};
use gazelens::synthetic::{generate_export, ExportConfig};
use gazelens::templates::TemplateSet;

fn main() {
    let items = anonymize(&question_corpus(), &default_lexicon(), 5);
    for item in items.iter().take(3) {
        let label = item.label.as_deref().unwrap_or("?");
        let text = item.anonymized_text.as_deref().unwrap_or(&item.raw_text);
        println!("{label} = {} ({}): {text}", item.question_id, item.true_level.as_str());
    }

    let export = generate_export(&ExportConfig::default());
    let (table, _) = clean(&export.table, &CleanConfig::default()).expect("clean");
    let gaze = GazeArtifacts::from_table(&table, &items).expect("gaze artifacts");

    let specs: Vec<ModelSpec> = ["gpt4o", "o1", "r1"]
        .iter()
        .enumerate()
        .map(|(i, m)| ModelSpec::with_mock(m, MockConfig::new(i as u64).with_fallback(MockFallback::LevelGuess)))
        .collect();
    let gateway = Gateway::new(RetryPolicy { max_attempts: 2, base_delay_ms: 0 }, 8);
    let outcome = run_and_score(
        &gateway,
        &items,
        &specs,
        Some(&gaze),
        &TemplateSet::default(),
        &DifficultyConfig { repetitions: 3, ..DifficultyConfig::default() },
    )
    .expect("difficulty run");
    println!("{} prediction runs", outcome.runs.len());
    print!("{}", outcome.grid.to_tsv());
}

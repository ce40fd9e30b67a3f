//! Train the autoencoder on synthetic expert gaze, then flag spiked student
//! windows and print the per-question counts.
//!
//!     cargo run --release -p gazelens --example anomaly_benchmark

use std::time::Instant;

use gazelens::anomaly_lstm::{calibrate_threshold, detect, score_windows, train, DetectConfig, TrainConfig};
use gazelens::synthetic::{BenchmarkConfig, GazeBenchmark};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let bench = GazeBenchmark::generate(BenchmarkConfig::default());
    let experts = bench.expert_windows();
    let cfg = TrainConfig { epochs: 500, seed: 3, ..TrainConfig::default() };

    let started = Instant::now();
    let model = train(&experts, &cfg).expect("training");
    println!(
        "trained on {} expert windows in {:.1?}: loss {:.4} -> {:.4}",
        experts.len(),
        started.elapsed(),
        model.initial_loss().unwrap(),
        model.final_loss().unwrap()
    );

    let train_errors = score_windows(&model, &experts).unwrap();
    let threshold = calibrate_threshold(&train_errors, 3.0).unwrap();
    let report = detect(&model, threshold, &bench.student_windows(), &DetectConfig::default()).unwrap();
    let (precision, recall) = bench.precision_recall(&report);

    let holdout = score_windows(&model, &bench.holdout_windows()).unwrap();
    let students: Vec<f64> = report.windows.iter().map(|w| w.error).collect();
    println!("threshold (k=3) {threshold:.4}");
    println!("median error: held-out experts {:.4}, students {:.4}", median(holdout), median(students));
    println!(
        "flagged {} of {} windows, precision {precision:.3}, recall {recall:.3}",
        report.summary.flagged, report.summary.total_windows
    );

    let s = &report.summary;
    for student in &s.students {
        let agg = &s.per_student[student];
        println!("{student}: {} anomalies, top questions {:?}", agg.flagged, agg.top_questions);
    }
    println!("double-zero questions: {:?}", s.double_zero);
}

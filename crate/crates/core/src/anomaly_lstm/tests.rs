use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gaze_data::{Expertise, FEATURE_DIM};

fn seq(pid: &str, qid: &str, len: usize) -> Sequence {
    Sequence {
        key: SequenceKey { participant_id: pid.into(), question_id: qid.into() },
        expertise: Some(Expertise::Expert),
        role: None,
        rows: (0..len).collect(),
        features: (0..len).map(|i| [200.0 + i as f64, 30.0 + (i % 3) as f64, 0.1 * (i % 7) as f64, 0.5]).collect(),
        aoi: (0..len).map(|i| Some(if i % 2 == 0 { AoiCategory::Error } else { AoiCategory::NonError })).collect(),
    }
}

fn window(rows: Vec<Vec<f64>>) -> Window {
    Window {
        participant_id: "E1".into(),
        question_id: "A1".into(),
        start: 0,
        features: rows,
        aoi_majority: AoiCategory::NonError,
    }
}

fn random_window(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Vec<f64> {
    (0..steps * dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

struct Identity(usize);

impl Reconstructor for Identity {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

struct Offset(usize, f64);

impl Reconstructor for Offset {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v + self.1).collect()
    }
}

#[test]
fn windows_of_exact_multiple() {
    let ws = build_windows([&seq("E1", "A1", 10)], 5, 5).unwrap();
    assert_eq!(ws.windows.len(), 2);
    assert_eq!(ws.windows[1].start, 5);
    assert!(ws.short.is_empty());
}

#[test]
fn short_sequence_is_reported() {
    let ws = build_windows([&seq("E1", "A1", 4)], 5, 5).unwrap();
    assert!(ws.windows.is_empty());
    assert_eq!(ws.short.len(), 1);
}

#[test]
fn window_config_errors() {
    assert!(matches!(build_windows([&seq("E1", "A1", 4)], 1, 1), Err(AnomalyError::Config(_))));
    assert!(matches!(build_windows([&seq("E1", "A1", 4)], 2, 0), Err(AnomalyError::Config(_))));
}

#[test]
fn majority_ties_go_to_error() {
    use AoiCategory::*;
    assert_eq!(aoi_majority(&[Some(Error), Some(NonError)]), Error);
    assert_eq!(aoi_majority(&[Some(NonError), Some(NonError), Some(Error)]), NonError);
    assert_eq!(aoi_majority(&[None, None]), NonError);
}

proptest! {
    #[test]
    fn window_count_matches_formula(len in 0usize..200, w in 2usize..40, stride in 1usize..40) {
        let ws = build_windows([&seq("E1", "A1", len)], w, stride).unwrap();
        let expected = if len >= w { (len - w) / stride + 1 } else { 0 };
        prop_assert_eq!(ws.windows.len(), expected);
        for win in &ws.windows {
            prop_assert_eq!(win.len(), w);
            prop_assert!(win.start + w <= len);
        }
    }

    #[test]
    fn threshold_grows_with_k(errors in prop::collection::vec(0.0f64..10.0, 2..50), k1 in 0.0f64..5.0, dk in 0.01f64..5.0) {
        prop_assume!(errors.iter().any(|e| (e - errors[0]).abs() > 1e-6));
        let t1 = calibrate_threshold(&errors, k1).unwrap();
        let t2 = calibrate_threshold(&errors, k1 + dk).unwrap();
        prop_assert!(t1 < t2);
    }

    #[test]
    fn reconstruction_error_is_non_negative(seed in any::<u64>(), steps in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = LstmModel::init(Normalizer::identity(3), 4, seed);
        let x = random_window(&mut rng, steps, 3);
        let w = window(x.chunks(3).map(<[f64]>::to_vec).collect());
        prop_assert!(reconstruction_error(&model, &w).unwrap() >= 0.0);
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), hidden in 4usize..=8, steps in 6usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = LstmModel::init(Normalizer::identity(FEATURE_DIM), hidden, seed);
        let x = random_window(&mut rng, steps, FEATURE_DIM);
        let check = gradient_check(&model, &x, 1e-5).unwrap();
        prop_assert!(check.max_relative_error < 1e-4, "{:?}", check);
    }
}

#[test]
fn normalizer_centers_training_data() {
    let mut a = seq("E1", "A1", 40);
    a.features.iter_mut().enumerate().for_each(|(i, f)| f[3] = (i as f64).sqrt());
    let ws = build_windows([&a, &seq("E2", "A1", 33)], 8, 4).unwrap();
    let n = Normalizer::fit(&ws.windows).unwrap();
    assert_eq!(n.feature_names[0], "fixation_duration_ms");
    let rows: Vec<Vec<f64>> = ws.windows.iter().flat_map(|w| n.apply(w).unwrap().features).collect();
    for k in 0..FEATURE_DIM {
        let mean = rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
        let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / rows.len() as f64;
        assert!(mean.abs() < 1e-9, "feature {k} mean {mean}");
        assert!((var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn constant_feature_is_rejected_by_name() {
    let ws = build_windows([&seq("E1", "A1", 20)], 5, 5).unwrap();
    let n = Normalizer::fit(&ws.windows);
    match n {
        Err(AnomalyError::ZeroVariance { feature }) => assert_eq!(feature, "gaze_y"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn outliers_are_not_clipped() {
    let train = window(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
    let n = Normalizer::fit(std::slice::from_ref(&train)).unwrap();
    let z = n.apply_flat(&window(vec![vec![50.0], vec![1.5]])).unwrap();
    assert!(z[0] > 3.0);
}

#[test]
fn zero_weights_reconstruct_zeros() {
    let model = LstmModel::zeros(4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = model.reconstruct_flat(&random_window(&mut rng, 7, 4)).unwrap();
    assert_eq!(y.len(), 28);
    assert!(y.iter().all(|v| *v == 0.0));
}

#[test]
fn stub_reconstructors() {
    let w = window(vec![vec![1.0, -2.0], vec![0.5, 3.0], vec![0.0, 0.0]]);
    assert_eq!(reconstruction_error(&Identity(2), &w).unwrap(), 0.0);
    assert_eq!(reconstruction_error(&Offset(2, 1.0), &w).unwrap(), 1.0);
    assert!(matches!(reconstruction_error(&Identity(3), &w), Err(AnomalyError::Shape { .. })));
}

#[test]
fn threshold_arithmetic() {
    let t = calibrate_threshold(&[1.0, 2.0, 3.0], 2.0).unwrap();
    assert!((t - 3.63299).abs() < 1e-5, "{t}");
    assert_eq!(calibrate_threshold(&[1.0, 2.0, 3.0], 0.0).unwrap(), 2.0);
    assert!(calibrate_threshold(&[1.0], 1.0).is_err());
    assert!(calibrate_threshold(&[1.0, 2.0], -1.0).is_err());
}

#[test]
fn flag_set_shrinks_as_k_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let train: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
    let scores: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..3.0)).collect();
    let mut previous: Option<Vec<usize>> = None;
    for k in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let t = calibrate_threshold(&train, k).unwrap();
        let flagged: Vec<usize> = (0..scores.len()).filter(|i| scores[*i] > t).collect();
        if let Some(prev) = &previous {
            assert!(flagged.iter().all(|i| prev.contains(i)));
        }
        previous = Some(flagged);
    }
}

#[test]
fn zero_model_on_zero_window_has_defined_error() {
    let model = LstmModel::zeros(4, 4);
    let check = gradient_check(&model, &[0.0; 24], 1e-5).unwrap();
    assert_eq!(check.max_relative_error, 0.0);
    let (_, grad) = lstm::loss_and_gradient(&model.params, &model.layout, &[0.0; 24], GradientFault::None);
    let l = model.layout;
    assert!(grad[l.out_w..l.len].iter().all(|g| *g == 0.0));
}

#[test]
fn forget_gate_sign_bug_is_caught() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = LstmModel::init(Normalizer::identity(4), 6, 21);
    let x = random_window(&mut rng, 8, 4);
    let clean = gradient_check(&model, &x, 1e-5).unwrap();
    let faulty = gradient_check_with_fault(&model, &x, 1e-5, GradientFault::FlipForgetGate).unwrap();
    assert!(clean.max_relative_error < 1e-4);
    assert!(faulty.max_relative_error > 1e-2, "{faulty:?}");
}

#[test]
fn epsilon_outside_range_is_rejected() {
    let model = LstmModel::zeros(2, 2);
    assert!(gradient_check(&model, &[0.0; 4], 1e-2).is_err());
    assert!(gradient_check(&model, &[0.0; 4], 1e-9).is_err());
}

#[test]
fn relative_error_rule() {
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    assert_eq!(relative_error(1.0, 0.0), 1.0);
    assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    assert!((relative_error(2e-8, 1e-8) - 1e-2).abs() < 1e-15);
}

fn small_training_set() -> Vec<Window> {
    let seqs: Vec<Sequence> = (0..3)
        .map(|p| {
            let mut s = seq(&format!("E{p}"), "A1", 24);
            for (i, f) in s.features.iter_mut().enumerate() {
                let phase = i as f64 * std::f64::consts::TAU / 8.0;
                *f = [250.0 + 50.0 * phase.sin(), 40.0 + 8.0 * phase.cos(), 0.5 + 0.2 * phase.sin(), 0.5 + p as f64 * 0.01 + 0.1 * (2.0 * phase).sin()];
            }
            s
        })
        .collect();
    build_windows(&seqs, 8, 8).unwrap().windows
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let windows = small_training_set();
    let cfg = TrainConfig { hidden_dim: 6, epochs: 30, learning_rate: 0.05, seed: 4, ..TrainConfig::default() };
    let a = train(&windows, &cfg).unwrap();
    let b = train(&windows, &cfg).unwrap();
    assert_eq!(a.loss_history.len(), 31);
    assert!(a.final_loss().unwrap() < a.initial_loss().unwrap());
    assert_eq!(a.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>(), b.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>());
    let c = train(&windows, &TrainConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let windows = small_training_set();
    let cfg = TrainConfig { hidden_dim: 4, epochs: 50, learning_rate: 1e300, clip_norm: f64::INFINITY, seed: 1 };
    assert!(matches!(train(&windows, &cfg), Err(AnomalyError::Divergence { .. })));
}

#[test]
fn scoring_keeps_input_order() {
    let windows = small_training_set();
    let model = train(&windows, &TrainConfig { hidden_dim: 4, epochs: 2, ..TrainConfig::default() }).unwrap();
    let parallel = score_windows(&model, &windows).unwrap();
    let serial: Vec<f64> = windows.iter().map(|w| model.score(w).unwrap()).collect();
    assert_eq!(parallel, serial);
}

#[test]
fn model_file_round_trip() {
    let windows = small_training_set();
    let model = train(&windows, &TrainConfig { hidden_dim: 5, epochs: 3, ..TrainConfig::default() }).unwrap();
    let dir = std::env::temp_dir().join(format!("gazelens-model-{}", std::process::id()));
    let path = dir.join("model.json");
    save_model(&path, &model).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.score(&windows[0]).unwrap(), model.score(&windows[0]).unwrap());

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    let err = load_model(&path).unwrap_err().to_string();
    assert!(err.contains("model.json") && err.contains("line") && err.contains("byte"), "{err}");
    std::fs::remove_dir_all(dir).ok();
}

fn report_fixture() -> AnomalyReport {
    let mut windows = Vec::new();
    let mut errors = Vec::new();
    for st in ["S1", "S2"] {
        for (qi, q) in crate::gaze_data::default_questions().iter().enumerate() {
            for w in 0..4 {
                windows.push(Window {
                    participant_id: st.into(),
                    question_id: q.clone(),
                    start: w * 8,
                    features: vec![],
                    aoi_majority: if w % 2 == 0 { AoiCategory::Error } else { AoiCategory::NonError },
                });
                let hot = (st == "S2" && (q == "B1" || q == "D2") && w < 3) || (st == "S1" && qi == 0 && w == 0);
                errors.push(if hot || (q != "C2" && w == 3 && qi % 3 == 0) { 5.0 } else { 0.1 });
            }
        }
    }
    AnomalyReport::from_scores(&windows, &errors, 1.0, &DetectConfig::default())
}

#[test]
fn report_counts_are_conserved() {
    let r = report_fixture();
    let s = &r.summary;
    assert_eq!(s.cells.len(), 48);
    assert_eq!(s.cells.iter().map(|c| c.count).sum::<usize>(), s.flagged);
    assert_eq!(s.per_question.values().sum::<usize>(), s.flagged);
    assert_eq!(s.per_aoi.values().sum::<usize>(), s.flagged);
    assert_eq!(s.per_student.values().map(|a| a.flagged).sum::<usize>(), s.flagged);
    assert_eq!(r.windows.iter().filter(|w| w.flagged).count(), s.flagged);
}

#[test]
fn report_ranks_and_double_zero() {
    let s = report_fixture().summary;
    let top: Vec<&str> = s.per_student["S2"].top_questions.iter().map(|(q, _)| q.as_str()).collect();
    assert_eq!(top, ["B1", "D2"]);
    assert_eq!(s.question_count("S2", "B1"), 4);
    assert!(s.double_zero.contains(&"C2".to_string()));
    assert!(!s.double_zero.contains(&"B1".to_string()));
}

#[test]
fn all_below_threshold_is_empty() {
    let r = report_fixture();
    let errors: Vec<f64> = r.windows.iter().map(|_| 0.0).collect();
    let windows: Vec<Window> = r
        .windows
        .iter()
        .map(|w| Window {
            participant_id: w.participant_id.clone(),
            question_id: w.question_id.clone(),
            start: w.start,
            features: vec![],
            aoi_majority: w.aoi,
        })
        .collect();
    let quiet = AnomalyReport::from_scores(&windows, &errors, 1.0, &DetectConfig::default());
    assert_eq!(quiet.summary.flagged, 0);
    assert!(quiet.summary.cells.iter().all(|c| c.count == 0));
    assert_eq!(quiet.summary.double_zero.len(), 12);
}

#[test]
fn payload_round_trips_counts() {
    let r = report_fixture();
    let back: AnomalySummary = serde_json::from_str(&r.summary.to_payload()).unwrap();
    assert_eq!(back, r.summary);
    let bundle = summarize_for_llm(&r, &crate::templates::TemplateSet::default(), 100_000).unwrap();
    assert_eq!(bundle.chunks.len(), 1);

    let empty = AnomalyReport::from_scores(&[], &[], 1.0, &DetectConfig::default());
    assert!(empty.summary.cells.is_empty());
    assert_eq!(empty.summary.total_windows, 0);
    assert!(empty.summary.to_payload().contains("band_rates"));
}

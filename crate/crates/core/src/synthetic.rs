//! Seeded synthetic data for examples and tests.
//!
//! - [`generate_export`]: a pair-programming gaze export with 19 participants,
//!   optional injected defects and a manifest of what was generated.
//! - [`GazeBenchmark`]: smooth periodic expert and student sequences with
//!   spikes injected into a known set of student windows.
//! - [`review_panel`]: literature evidence and expert verdicts for a list of
//!   pattern ids.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::anomaly_lstm::{build_windows, AnomalyReport, Window};
use crate::co_eval::{LiteratureEvidence, Quartile, Rater, ReviewVerdict, Stance, Verdict};
use crate::difficulty::{default_question_levels, DifficultyLevel};
use crate::gaze_data::{
    default_questions, AoiCategory, AoiConfig, AoiDefinition, ColumnSchema, Expertise, GazeRecord, GazeTable, Rect,
    Role, Sequence, SequenceKey,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    StudentStudent,
    ExpertExpert,
    StudentExpert,
    /// Left over when the participant count is odd.
    Solo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantInfo {
    pub participant_id: String,
    pub expertise: Expertise,
    pub role: Role,
    pub pair_id: String,
    pub pairing: Pairing,
}

/// Extra rows mixed into the export, each failing exactly one cleaning rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectCounts {
    /// Rows with an empty fixation duration.
    pub missing: usize,
    /// Rows with a 5 ms fixation.
    pub out_of_range: usize,
    /// Rows repeating the timestamp of the row right after them.
    pub duplicate_timestamps: usize,
    /// Rows on a practice question outside the experiment.
    pub irrelevant: usize,
}

impl DefectCounts {
    pub fn none() -> DefectCounts {
        DefectCounts { missing: 0, out_of_range: 0, duplicate_timestamps: 0, irrelevant: 0 }
    }

    pub fn total(&self) -> usize {
        self.missing + self.out_of_range + self.duplicate_timestamps + self.irrelevant
    }
}

impl Default for DefectCounts {
    fn default() -> Self {
        DefectCounts { missing: 6, out_of_range: 4, duplicate_timestamps: 5, irrelevant: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    pub seed: u64,
    pub students: usize,
    pub experts: usize,
    /// Sequence lengths are drawn from `min_records..=max_records`.
    pub min_records: usize,
    pub max_records: usize,
    pub questions: Vec<String>,
    pub defects: DefectCounts,
    /// Probability that a student struggles with a question. Only struggling
    /// sessions follow the student gaze profile; the rest look like experts.
    pub struggle_rate: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            seed: 7,
            students: 9,
            experts: 10,
            min_records: 24,
            max_records: 40,
            questions: default_questions(),
            defects: DefectCounts::default(),
            struggle_rate: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLength {
    pub participant_id: String,
    pub question_id: String,
    pub records: usize,
}

/// Ground truth for a generated export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub seed: u64,
    pub participants: Vec<ParticipantInfo>,
    pub questions: Vec<String>,
    /// Lengths after cleaning, in participant then question order.
    pub sequences: Vec<SequenceLength>,
    /// Student sessions generated with the student gaze profile.
    pub struggles: Vec<SequenceLength>,
    pub clean_rows: usize,
    pub defects: DefectCounts,
    pub total_rows: usize,
}

impl ExportManifest {
    pub fn participant_ids(&self) -> BTreeSet<String> {
        self.participants.iter().map(|p| p.participant_id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExport {
    pub table: GazeTable,
    pub manifest: ExportManifest,
    pub aoi: Vec<AoiDefinition>,
}

/// Problem area in the lower half of the screen, stem in the upper half.
pub fn synthetic_aoi_definitions(questions: &[String]) -> Vec<AoiDefinition> {
    questions
        .iter()
        .flat_map(|q| {
            [
                AoiDefinition {
                    name: format!("{q}_problem"),
                    question_id: q.clone(),
                    rect: Rect { x0: 0.05, y0: 0.55, x1: 0.95, y1: 0.95 },
                    category: AoiCategory::Error,
                },
                AoiDefinition {
                    name: format!("{q}_stem"),
                    question_id: q.clone(),
                    rect: Rect { x0: 0.05, y0: 0.05, x1: 0.95, y1: 0.5 },
                    category: AoiCategory::NonError,
                },
            ]
        })
        .collect()
}

pub fn synthetic_aoi_config(questions: &[String]) -> AoiConfig {
    AoiConfig::new(synthetic_aoi_definitions(questions))
}

fn assign_pairs(students: usize, experts: usize) -> Vec<ParticipantInfo> {
    let mut s: Vec<String> = (1..=students).map(|i| format!("S{i}")).collect();
    let mut e: Vec<String> = (1..=experts).map(|i| format!("E{i}")).collect();
    s.reverse();
    e.reverse();
    let mut out = Vec::new();
    let mut pair = 0;
    let kinds = [Pairing::StudentStudent, Pairing::ExpertExpert, Pairing::StudentExpert];
    let mut k = 0;
    while s.len() + e.len() >= 2 {
        let kind = kinds[k % 3];
        k += 1;
        let members = match kind {
            Pairing::StudentStudent if s.len() >= 2 => [s.pop(), s.pop()],
            Pairing::ExpertExpert if e.len() >= 2 => [e.pop(), e.pop()],
            Pairing::StudentExpert if !s.is_empty() && !e.is_empty() => [s.pop(), e.pop()],
            _ => continue,
        };
        pair += 1;
        for (m, role) in members.into_iter().zip([Role::Driver, Role::Navigator]) {
            let id = m.expect("pool checked");
            let expertise = if id.starts_with('S') { Expertise::Student } else { Expertise::Expert };
            out.push(ParticipantInfo { participant_id: id, expertise, role, pair_id: format!("pair{pair:02}"), pairing: kind });
        }
    }
    for id in s.into_iter().chain(e) {
        pair += 1;
        let expertise = if id.starts_with('S') { Expertise::Student } else { Expertise::Expert };
        out.push(ParticipantInfo {
            participant_id: id,
            expertise,
            role: Role::Driver,
            pair_id: format!("pair{pair:02}"),
            pairing: Pairing::Solo,
        });
    }
    out
}

/// Generates the export. Cleaning it with the default [`crate::gaze_data::CleanConfig`]
/// drops exactly the injected defect rows and returns the clean rows in
/// their original order.
pub fn generate_export(cfg: &ExportConfig) -> SyntheticExport {
    assert!(cfg.min_records >= 1 && cfg.min_records <= cfg.max_records, "invalid record range");
    assert!((0.0..=1.0).contains(&cfg.struggle_rate), "struggle rate outside [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let participants = assign_pairs(cfg.students, cfg.experts);
    let levels = default_question_levels();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut records = Vec::new();
    let mut sequences = Vec::new();
    let mut struggles = Vec::new();
    for p in &participants {
        for (qi, q) in cfg.questions.iter().enumerate() {
            let n = rng.random_range(cfg.min_records..=cfg.max_records);
            let expert = p.expertise == Expertise::Expert || !rng.random_bool(cfg.struggle_rate);
            if !expert {
                struggles.push(SequenceLength { participant_id: p.participant_id.clone(), question_id: q.clone(), records: n });
            }
            let hard = match levels.get(q) {
                Some(DifficultyLevel::Hard) => 2.0,
                Some(DifficultyLevel::Medium) => 1.0,
                _ => 0.0,
            };
            let base_fix = if expert { 230.0 } else { 270.0 } + 25.0 * hard;
            let problem_bias = if expert { 0.2 } else { 0.0 };
            let phase = rng.random_range(0.0..TAU);
            let mut t = 600_000 * qi as u64 + rng.random_range(0..1000);
            for i in 0..n {
                let a = phase + TAU * i as f64 / 12.0;
                let fix = (base_fix + 60.0 * a.sin() + 15.0 * noise.sample(&mut rng)).clamp(60.0, 1900.0);
                let sac = (40.0 + 10.0 * a.cos() + 3.0 * noise.sample(&mut rng)).max(5.0);
                let x = (0.5 + 0.3 * (0.7 * a).sin() + 0.03 * noise.sample(&mut rng)).clamp(0.0, 1.0);
                let y = (0.5 + problem_bias + 0.25 * a.sin() + 0.03 * noise.sample(&mut rng)).clamp(0.0, 1.0);
                t += (fix + sac).round() as u64;
                records.push(GazeRecord {
                    participant_id: Some(p.participant_id.clone()),
                    role: Some(p.role),
                    expertise: Some(p.expertise),
                    question_id: Some(q.clone()),
                    timestamp_ms: Some(t),
                    fixation_number: Some(i as u64 + 1),
                    fixation_duration_ms: Some(round3(fix)),
                    saccade_number: Some(i as u64 + 1),
                    saccade_duration_ms: Some(round3(sac)),
                    gaze_x: Some(round3(x)),
                    gaze_y: Some(round3(y)),
                    aoi: None,
                    extra: Default::default(),
                });
            }
            sequences.push(SequenceLength { participant_id: p.participant_id.clone(), question_id: q.clone(), records: n });
        }
    }
    let clean_rows = records.len();

    // defects go in front of a clean row so the clean rows keep their order
    let d = cfg.defects;
    let mut inserts: Vec<(usize, GazeRecord)> = Vec::new();
    let mut kinds = Vec::new();
    kinds.extend(std::iter::repeat_n(0, d.missing));
    kinds.extend(std::iter::repeat_n(1, d.out_of_range));
    kinds.extend(std::iter::repeat_n(2, d.duplicate_timestamps));
    kinds.extend(std::iter::repeat_n(3, d.irrelevant));
    for kind in kinds {
        let at = rng.random_range(0..clean_rows);
        let mut r = records[at].clone();
        match kind {
            0 => {
                r.fixation_duration_ms = None;
                r.timestamp_ms = r.timestamp_ms.map(|t| t.saturating_sub(1));
            }
            1 => {
                r.fixation_duration_ms = Some(5.0);
                r.timestamp_ms = r.timestamp_ms.map(|t| t.saturating_sub(1));
            }
            2 => r.fixation_duration_ms = r.fixation_duration_ms.map(|f| f + 17.0),
            _ => r.question_id = Some("P0".into()),
        }
        inserts.push((at, r));
    }
    inserts.sort_by_key(|(at, _)| *at);
    let mut out = Vec::with_capacity(clean_rows + inserts.len());
    let mut pending = inserts.into_iter().peekable();
    for (i, r) in records.into_iter().enumerate() {
        while pending.peek().is_some_and(|(at, _)| *at == i) {
            out.push(pending.next().expect("peeked").1);
        }
        out.push(r);
    }
    let total_rows = out.len();
    let table = GazeTable::new(ColumnSchema::default(), out, format!("synthetic:seed={}", cfg.seed));
    SyntheticExport {
        table,
        manifest: ExportManifest {
            seed: cfg.seed,
            participants,
            questions: cfg.questions.clone(),
            sequences,
            struggles,
            clean_rows,
            defects: d,
            total_rows,
        },
        aoi: synthetic_aoi_definitions(&cfg.questions),
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Identifies one window of the benchmark.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowKey {
    pub participant_id: String,
    pub question_id: String,
    pub start: usize,
}

impl WindowKey {
    pub fn of(w: &Window) -> WindowKey {
        WindowKey { participant_id: w.participant_id.clone(), question_id: w.question_id.clone(), start: w.start }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    /// Period of the signal; windows are cut with stride equal to this.
    pub window_len: usize,
    pub experts: Vec<String>,
    pub holdout_experts: Vec<String>,
    pub students: Vec<String>,
    pub questions: Vec<String>,
    pub expert_windows: usize,
    pub student_windows: usize,
    /// Gaussian noise as a fraction of each feature's amplitude.
    pub noise: f64,
    /// Share of all student windows that receive spikes.
    pub spike_fraction: f64,
    pub spike_student: String,
    pub spike_questions: Vec<String>,
    /// Spike height in feature amplitudes.
    pub spike_height: f64,
    pub spikes_per_window: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 11,
            window_len: 16,
            experts: vec!["E1".into(), "E2".into()],
            holdout_experts: vec!["E3".into()],
            students: vec!["S1".into(), "S2".into()],
            questions: default_questions(),
            expert_windows: 2,
            student_windows: 10,
            noise: 0.05,
            spike_fraction: 0.05,
            spike_student: "S2".into(),
            spike_questions: vec!["B1".into(), "D2".into()],
            spike_height: 6.0,
            spikes_per_window: 3,
        }
    }
}

/// Expert baseline, held-out experts and students with known spike windows.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeBenchmark {
    pub config: BenchmarkConfig,
    pub experts: Vec<Sequence>,
    pub holdout: Vec<Sequence>,
    pub students: Vec<Sequence>,
    pub injected: BTreeSet<WindowKey>,
}

// (mean, amplitude) of fixation, saccade, gaze x, gaze y
const SIGNAL: [(f64, f64); 4] = [(250.0, 60.0), (40.0, 10.0), (0.5, 0.25), (0.5, 0.2)];

fn signal(k: usize, phase: f64) -> f64 {
    let (mean, amp) = SIGNAL[k];
    mean + amp
        * match k {
            0 => phase.sin(),
            1 => phase.cos(),
            2 => (phase + 0.5).sin(),
            _ => (2.0 * phase).sin(),
        }
}

impl GazeBenchmark {
    pub fn generate(config: BenchmarkConfig) -> GazeBenchmark {
        let c = &config;
        assert!(c.window_len >= 2, "window_len must be at least 2");
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let noise = Normal::new(0.0, c.noise.max(0.0)).expect("finite noise");
        let make = |pid: &str, expertise: Expertise, windows: usize, rng: &mut ChaCha8Rng| -> Vec<Sequence> {
            c.questions
                .iter()
                .enumerate()
                .map(|(qi, q)| {
                    let len = windows * c.window_len;
                    let scale = 1.0 + rng.random_range(-0.1..0.1);
                    let features = (0..len)
                        .map(|t| {
                            let phase = TAU * (t % c.window_len) as f64 / c.window_len as f64;
                            std::array::from_fn(|k| {
                                let (mean, amp) = SIGNAL[k];
                                mean + scale * (signal(k, phase) - mean) + amp * noise.sample(rng)
                            })
                        })
                        .collect();
                    let aoi = (0..len)
                        .map(|t| {
                            Some(if (t / c.window_len + qi).is_multiple_of(2) { AoiCategory::Error } else { AoiCategory::NonError })
                        })
                        .collect();
                    Sequence {
                        key: SequenceKey { participant_id: pid.into(), question_id: q.clone() },
                        expertise: Some(expertise),
                        role: None,
                        rows: (0..len).collect(),
                        features,
                        aoi,
                    }
                })
                .collect()
        };
        let experts: Vec<Sequence> =
            c.experts.iter().flat_map(|p| make(p, Expertise::Expert, c.expert_windows, &mut rng)).collect();
        let holdout: Vec<Sequence> =
            c.holdout_experts.iter().flat_map(|p| make(p, Expertise::Expert, c.expert_windows, &mut rng)).collect();
        let mut students: Vec<Sequence> =
            c.students.iter().flat_map(|p| make(p, Expertise::Student, c.student_windows, &mut rng)).collect();

        let total = students.len() * c.student_windows;
        let wanted = (c.spike_fraction * total as f64).ceil() as usize;
        let mut candidates: Vec<WindowKey> = students
            .iter()
            .filter(|s| s.key.participant_id == c.spike_student && c.spike_questions.contains(&s.key.question_id))
            .flat_map(|s| {
                (0..c.student_windows).map(|w| WindowKey {
                    participant_id: s.key.participant_id.clone(),
                    question_id: s.key.question_id.clone(),
                    start: w * c.window_len,
                })
            })
            .collect();
        candidates.shuffle(&mut rng);
        candidates.truncate(wanted);
        let injected: BTreeSet<WindowKey> = candidates.into_iter().collect();

        for s in &mut students {
            for key in injected.iter().filter(|k| k.participant_id == s.key.participant_id && k.question_id == s.key.question_id) {
                let steps = rand::seq::index::sample(&mut rng, c.window_len, c.spikes_per_window.min(c.window_len));
                for t in steps {
                    let row = &mut s.features[key.start + t];
                    row[0] += c.spike_height * SIGNAL[0].1;
                    row[1] += c.spike_height * SIGNAL[1].1;
                }
            }
        }
        GazeBenchmark { config, experts, holdout, students, injected }
    }

    pub fn stride(&self) -> usize {
        self.config.window_len
    }

    fn windows(&self, seqs: &[Sequence]) -> Vec<Window> {
        build_windows(seqs, self.config.window_len, self.stride()).expect("window_len checked").windows
    }

    pub fn expert_windows(&self) -> Vec<Window> {
        self.windows(&self.experts)
    }

    pub fn holdout_windows(&self) -> Vec<Window> {
        self.windows(&self.holdout)
    }

    pub fn student_windows(&self) -> Vec<Window> {
        self.windows(&self.students)
    }

    pub fn is_injected(&self, w: &Window) -> bool {
        self.injected.contains(&WindowKey::of(w))
    }

    /// `(precision, recall)` of the report's flags against the injected set.
    /// Precision is 1 when nothing is flagged.
    pub fn precision_recall(&self, report: &AnomalyReport) -> (f64, f64) {
        let flagged: BTreeSet<WindowKey> = report
            .windows
            .iter()
            .filter(|w| w.flagged)
            .map(|w| WindowKey { participant_id: w.participant_id.clone(), question_id: w.question_id.clone(), start: w.start })
            .collect();
        let hits = flagged.intersection(&self.injected).count() as f64;
        let precision = if flagged.is_empty() { 1.0 } else { hits / flagged.len() as f64 };
        let recall = if self.injected.is_empty() { 1.0 } else { hits / self.injected.len() as f64 };
        (precision, recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewPanel {
    pub evidence: Vec<LiteratureEvidence>,
    pub expert: Vec<ReviewVerdict>,
}

/// Five ranked papers per pattern plus one expert verdict. Each pattern has
/// a hidden validity; stances lean toward it and the expert matches it with
/// probability `agreement`.
pub fn review_panel(pattern_ids: &[String], seed: u64, agreement: f64) -> ReviewPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evidence = Vec::new();
    let mut expert = Vec::new();
    for (i, pid) in pattern_ids.iter().enumerate() {
        let valid = rng.random_bool(0.6);
        for rank in 1..=5u8 {
            let quartile = Quartile::ALL[rng.random_range(0..4)];
            let roll: f64 = rng.random();
            let stance = match (valid, roll) {
                (true, r) if r < 0.6 => Stance::Support,
                (true, r) if r < 0.85 => Stance::Neutral,
                (true, _) => Stance::Oppose,
                (false, r) if r < 0.15 => Stance::Support,
                (false, r) if r < 0.4 => Stance::Neutral,
                (false, _) => Stance::Oppose,
            };
            evidence.push(LiteratureEvidence {
                title: Some(format!("Study {} on {}", rank, &pid[..pid.len().min(6)])),
                ..LiteratureEvidence::new(pid, rank, quartile, stance)
            });
        }
        let agrees = rng.random_bool(agreement.clamp(0.0, 1.0));
        let verdict = if valid == agrees { Verdict::Valid } else { Verdict::Invalid };
        expert.push(ReviewVerdict {
            pattern_id: pid.clone(),
            rater: Rater::Expert,
            verdict,
            timestamp: 1_700_000_000_000 + i as u64 * 1000,
            note: None,
        });
    }
    ReviewPanel { evidence, expert }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze_data::{clean, sessionize, CleanConfig};

    #[test]
    fn nineteen_participants_with_all_pairings() {
        let ex = generate_export(&ExportConfig::default());
        assert_eq!(ex.manifest.participants.len(), 19);
        let students = ex.manifest.participants.iter().filter(|p| p.expertise == Expertise::Student).count();
        assert_eq!(students, 9);
        let kinds: BTreeSet<Pairing> = ex.manifest.participants.iter().map(|p| p.pairing).collect();
        assert!(kinds.contains(&Pairing::StudentStudent));
        assert!(kinds.contains(&Pairing::ExpertExpert));
        assert!(kinds.contains(&Pairing::StudentExpert));
        assert_eq!(ex.table.len(), ex.manifest.total_rows);
        assert_eq!(ex.manifest.total_rows, ex.manifest.clean_rows + ex.manifest.defects.total());
    }

    #[test]
    fn cleaning_removes_exactly_the_defects() {
        let ex = generate_export(&ExportConfig::default());
        let (cleaned, report) = clean(&ex.table, &CleanConfig::default()).unwrap();
        let d = ex.manifest.defects;
        assert_eq!(report.dropped_missing, d.missing);
        assert_eq!(report.dropped_irrelevant, d.irrelevant);
        assert_eq!(report.dropped_noise, d.out_of_range + d.duplicate_timestamps);
        assert_eq!(cleaned.len(), ex.manifest.clean_rows);
        let sessions = sessionize(&cleaned);
        for s in &ex.manifest.sequences {
            let key = SequenceKey { participant_id: s.participant_id.clone(), question_id: s.question_id.clone() };
            assert_eq!(sessions.sequences[&key].len(), s.records, "{key:?}");
        }
    }

    #[test]
    fn export_is_seeded() {
        let a = generate_export(&ExportConfig::default());
        let b = generate_export(&ExportConfig::default());
        let c = generate_export(&ExportConfig { seed: 8, ..ExportConfig::default() });
        assert_eq!(a, b);
        assert_ne!(a.table.records, c.table.records);
    }

    #[test]
    fn benchmark_injects_five_percent_on_target_questions() {
        let b = GazeBenchmark::generate(BenchmarkConfig::default());
        assert_eq!(b.injected.len(), 12);
        assert!(b.injected.iter().all(|k| k.participant_id == "S2" && (k.question_id == "B1" || k.question_id == "D2")));
        assert_eq!(b.experts.len(), 24);
        assert!(b.students.iter().all(|s| s.len() == 160));
    }

    #[test]
    fn review_panel_shape() {
        let ids: Vec<String> = (0..20).map(|i| format!("p{i:02}")).collect();
        let panel = review_panel(&ids, 3, 0.8);
        assert_eq!(panel.evidence.len(), 100);
        assert_eq!(panel.expert.len(), 20);
        assert_eq!(panel, review_panel(&ids, 3, 0.8));
    }
}

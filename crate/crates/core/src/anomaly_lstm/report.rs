use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{score_windows, AnomalyError, LstmModel, Window};
use crate::difficulty::{default_question_levels, DifficultyLevel};
use crate::gaze_data::{default_questions, AoiCategory};
use crate::segmentation::{build_bundle, BundleOptions, Payload, PromptBundle, SegmentationError};
use crate::templates::{TemplateSet, TemplateSlot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Question order of the count matrix.
    pub questions: Vec<String>,
    /// Difficulty band of each question for the error-rate summary.
    pub bands: BTreeMap<String, DifficultyLevel>,
    /// Questions listed per student, most anomalies first.
    pub top_n: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { questions: default_questions(), bands: default_question_levels(), top_n: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub participant_id: String,
    pub question_id: String,
    pub start: usize,
    pub aoi: AoiCategory,
    pub error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCell {
    pub student: String,
    pub question: String,
    pub aoi: AoiCategory,
    pub count: usize,
}

/// Flagged share of the windows of one difficulty band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRate {
    pub windows: usize,
    pub flagged: usize,
    /// `flagged / windows`; absent when the band has no windows.
    pub rate: Option<f64>,
}

impl BandRate {
    fn new(windows: usize, flagged: usize) -> BandRate {
        BandRate { windows, flagged, rate: (windows > 0).then(|| flagged as f64 / windows as f64) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentAggregate {
    pub windows: usize,
    pub flagged: usize,
    pub by_aoi: BTreeMap<AoiCategory, usize>,
    pub band_rates: BTreeMap<DifficultyLevel, BandRate>,
    /// `(question, anomalies)`, most anomalies first, only non-zero counts.
    pub top_questions: Vec<(String, usize)>,
}

/// Counts and aggregates of a detection run; this is also the payload sent
/// to the model for interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySummary {
    pub threshold: f64,
    pub total_windows: usize,
    pub flagged: usize,
    pub students: Vec<String>,
    pub questions: Vec<String>,
    /// Every student × question × AOI category combination.
    pub cells: Vec<CountCell>,
    pub per_student: BTreeMap<String, StudentAggregate>,
    pub per_question: BTreeMap<String, usize>,
    pub per_aoi: BTreeMap<AoiCategory, usize>,
    pub band_rates: BTreeMap<DifficultyLevel, BandRate>,
    /// Questions on which every student has windows and none is flagged.
    pub double_zero: Vec<String>,
}

impl AnomalySummary {
    pub fn count(&self, student: &str, question: &str, aoi: AoiCategory) -> usize {
        self.cells
            .iter()
            .find(|c| c.student == student && c.question == question && c.aoi == aoi)
            .map_or(0, |c| c.count)
    }

    pub fn question_count(&self, student: &str, question: &str) -> usize {
        AoiCategory::ALL.iter().map(|a| self.count(student, question, *a)).sum()
    }

    /// Compact JSON form.
    pub fn to_payload(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub summary: AnomalySummary,
    pub windows: Vec<WindowScore>,
}

/// Scores raw student windows with the model and aggregates the flags.
pub fn detect(
    model: &LstmModel,
    threshold: f64,
    windows: &[Window],
    cfg: &DetectConfig,
) -> Result<AnomalyReport, AnomalyError> {
    let errors = score_windows(model, windows)?;
    Ok(AnomalyReport::from_scores(windows, &errors, threshold, cfg))
}

impl AnomalyReport {
    /// Aggregates precomputed errors; `errors[i]` belongs to `windows[i]`.
    pub fn from_scores(windows: &[Window], errors: &[f64], threshold: f64, cfg: &DetectConfig) -> AnomalyReport {
        let scores: Vec<WindowScore> = windows
            .iter()
            .zip(errors)
            .map(|(w, &error)| WindowScore {
                participant_id: w.participant_id.clone(),
                question_id: w.question_id.clone(),
                start: w.start,
                aoi: w.aoi_majority,
                error,
                flagged: error > threshold,
            })
            .collect();

        let mut questions = cfg.questions.clone();
        for s in &scores {
            if !questions.contains(&s.question_id) {
                questions.push(s.question_id.clone());
            }
        }
        let mut students: Vec<String> = scores.iter().map(|s| s.participant_id.clone()).collect();
        students.sort();
        students.dedup();

        let mut counts: BTreeMap<(&str, &str, AoiCategory), usize> = BTreeMap::new();
        let mut window_counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for s in &scores {
            *window_counts.entry((&s.participant_id, &s.question_id)).or_default() += 1;
            if s.flagged {
                *counts.entry((&s.participant_id, &s.question_id, s.aoi)).or_default() += 1;
            }
        }
        let count = |st: &str, q: &str, a: AoiCategory| counts.get(&(st, q, a)).copied().unwrap_or(0);
        let qcount = |st: &str, q: &str| AoiCategory::ALL.iter().map(|a| count(st, q, *a)).sum::<usize>();

        let mut cells = Vec::new();
        for st in &students {
            for q in &questions {
                for aoi in AoiCategory::ALL {
                    cells.push(CountCell { student: st.clone(), question: q.clone(), aoi, count: count(st, q, aoi) });
                }
            }
        }

        let band_rates_for = |filter: &dyn Fn(&WindowScore) -> bool| -> BTreeMap<DifficultyLevel, BandRate> {
            DifficultyLevel::ALL
                .iter()
                .map(|level| {
                    let in_band: Vec<&WindowScore> = scores
                        .iter()
                        .filter(|s| filter(s) && cfg.bands.get(&s.question_id) == Some(level))
                        .collect();
                    (*level, BandRate::new(in_band.len(), in_band.iter().filter(|s| s.flagged).count()))
                })
                .collect()
        };

        let mut per_student = BTreeMap::new();
        for st in &students {
            let mine: Vec<&WindowScore> = scores.iter().filter(|s| &s.participant_id == st).collect();
            let mut by_aoi = BTreeMap::new();
            for aoi in AoiCategory::ALL {
                by_aoi.insert(aoi, mine.iter().filter(|s| s.flagged && s.aoi == aoi).count());
            }
            let mut top: Vec<(String, usize)> =
                questions.iter().map(|q| (q.clone(), qcount(st, q))).filter(|(_, c)| *c > 0).collect();
            // stable: equal counts keep question order
            top.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
            top.truncate(cfg.top_n);
            per_student.insert(
                st.clone(),
                StudentAggregate {
                    windows: mine.len(),
                    flagged: mine.iter().filter(|s| s.flagged).count(),
                    by_aoi,
                    band_rates: band_rates_for(&|s: &WindowScore| &s.participant_id == st),
                    top_questions: top,
                },
            );
        }

        let per_question = questions.iter().map(|q| (q.clone(), students.iter().map(|st| qcount(st, q)).sum())).collect();
        let per_aoi = AoiCategory::ALL
            .iter()
            .map(|a| (*a, scores.iter().filter(|s| s.flagged && s.aoi == *a).count()))
            .collect();
        let double_zero = if students.is_empty() {
            Vec::new()
        } else {
            questions
                .iter()
                .filter(|q| {
                    students.iter().all(|st| {
                        window_counts.get(&(st.as_str(), q.as_str())).copied().unwrap_or(0) > 0 && qcount(st, q) == 0
                    })
                })
                .cloned()
                .collect()
        };

        let summary = AnomalySummary {
            threshold,
            total_windows: scores.len(),
            flagged: scores.iter().filter(|s| s.flagged).count(),
            students,
            questions,
            cells,
            per_student,
            per_question,
            per_aoi,
            band_rates: band_rates_for(&|_| true),
            double_zero,
        };
        AnomalyReport { summary, windows: scores }
    }
}

struct SummaryPayload(String);

impl Payload for SummaryPayload {
    fn label(&self) -> String {
        "anomaly summary".into()
    }

    fn canonical(&self) -> String {
        self.0.clone()
    }
}

/// The summary wrapped in the anomaly-analysis template as one chunk.
pub fn summarize_for_llm(
    report: &AnomalyReport,
    templates: &TemplateSet,
    budget: usize,
) -> Result<PromptBundle, SegmentationError> {
    let payload = SummaryPayload(report.summary.to_payload());
    build_bundle(&[payload], TemplateSlot::Anomaly, templates, budget, BundleOptions::default())
}

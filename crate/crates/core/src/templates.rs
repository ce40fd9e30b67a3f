//! Prompt templates, one text per slot, with `{{NAME}}` placeholders.
//!
//! Built-in texts cover every slot. A templates directory may override any
//! of them with a file named `<slug>.txt`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::difficulty::PromptVariant;
use crate::segmentation::{PromptLevel, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "slot", rename_all = "snake_case")]
pub enum TemplateSlot {
    Mining { stage: Stage, level: PromptLevel },
    /// Cross-model summarization over deduplicated pattern sets.
    Inductive,
    /// Structured literature-evidence rating for one pattern.
    Literature,
    /// Anomaly-distribution analysis.
    Anomaly,
    Difficulty { variant: PromptVariant },
}

impl TemplateSlot {
    pub fn slug(&self) -> String {
        match self {
            TemplateSlot::Mining { stage, level } => format!("{}_{}", stage.slug(), level.slug()),
            TemplateSlot::Inductive => "inductive".into(),
            TemplateSlot::Literature => "literature".into(),
            TemplateSlot::Anomaly => "anomaly".into(),
            TemplateSlot::Difficulty { variant } => format!("difficulty_{}", variant.label()),
        }
    }

    pub fn all() -> Vec<TemplateSlot> {
        let mut slots = Vec::new();
        for stage in Stage::ALL {
            for level in PromptLevel::ALL {
                slots.push(TemplateSlot::Mining { stage, level });
            }
        }
        slots.extend([TemplateSlot::Inductive, TemplateSlot::Literature, TemplateSlot::Anomaly]);
        for variant in PromptVariant::ALL {
            slots.push(TemplateSlot::Difficulty { variant });
        }
        slots
    }
}

impl fmt::Display for TemplateSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

const LIST_INSTRUCTION: &str =
    "Answer only with a numbered list, one behavioral pattern per line, in the form \"1. <pattern>\".";

const BACKGROUND: &str = "The data come from a pair-programming study recorded with a 250 Hz \
eye tracker. Participants are students or experts acting as driver or navigator while solving \
twelve programming questions (A1 to D3). Each record is one fixation with its duration, the \
following saccade, and the normalized gaze position; AOI labels mark whether the gaze fell on \
the problem area (Error) or on the question stem (NonError).";

fn focus(stage: Stage) -> &'static str {
    match stage {
        Stage::Direct => "Focus on differences between students and experts, between roles, and across questions.",
        Stage::Horizontal => "Each JSON object is one fixation. Focus on how fields relate within the same record: \
            duration versus AOI, role versus gaze position, expertise versus saccade length.",
        Stage::Vertical => "Each JSON object pairs an identifier column with one numeric column across all records. \
            Focus on how each measure evolves over time and differs between identifiers.",
        Stage::Combined => "Reconcile the row-level and column-level findings into deeper patterns about \
            attention shifts, cognitive load and structural dependencies.",
    }
}

fn stage_intro(stage: Stage) -> &'static str {
    match stage {
        Stage::Direct => "Analyze the following raw eye-tracking table.",
        Stage::Horizontal => "Analyze the following eye-tracking records, one JSON object per record.",
        Stage::Vertical => "Analyze the following column series, one JSON object per identifier/measure pair.",
        Stage::Combined => "Merge and reanalyze the behavioral patterns found in the row-level and column-level analyses.",
    }
}

fn mining_default(stage: Stage, level: PromptLevel) -> String {
    let mut t = String::new();
    t.push_str(stage_intro(stage));
    t.push_str("\n\n");
    match level {
        PromptLevel::Detailed => {
            t.push_str(BACKGROUND);
            t.push_str("\n\n");
            t.push_str(focus(stage));
            t.push_str("\n\n");
        }
        PromptLevel::SemiDetailed => {
            t.push_str(BACKGROUND);
            t.push_str("\n\n");
        }
        PromptLevel::Brief => {}
    }
    if matches!(stage, Stage::Vertical | Stage::Combined) {
        t.push_str("Patterns from earlier analysis:\n{{PATTERNS}}\n\n");
    }
    if stage == Stage::Direct {
        t.push_str("Columns: {{HEADER}}\n");
    }
    t.push_str("Data:\n{{DATA}}\n\n");
    t.push_str(LIST_INSTRUCTION);
    t
}

fn default_text(slot: TemplateSlot) -> String {
    match slot {
        TemplateSlot::Mining { stage, level } => mining_default(stage, level),
        TemplateSlot::Inductive => format!(
            "The following behavioral pattern sets were produced by different models for the same data. \
             Induce a consolidated set of patterns, merging statements that say the same thing.\n\n\
             {{{{PATTERNS}}}}\n\n{LIST_INSTRUCTION}"
        ),
        TemplateSlot::Literature => "Behavioral pattern: {{PATTERN}}\n\n\
             Recommend the 5 most related research papers, most relevant first. For each paper give one \
             line in the form \"<rank> | <JCR quartile Q1-Q4> | <support|oppose|neutral> | <title>\" \
             stating whether the paper supports, opposes or is neutral towards the pattern."
            .into(),
        TemplateSlot::Anomaly => format!(
            "An LSTM trained on expert gaze flagged anomalous windows in student gaze data. The JSON below \
             gives anomaly counts per student, question and AOI category (Error = problem area, NonError = \
             question stem), plus group aggregates.\n\n\
             1) Horizontal, inter-group: how do the students' anomalies differ structurally from expert behavior?\n\
             2) Vertical, intra-individual: how does each student's anomaly profile evolve across questions?\n\n\
             Data:\n{{{{DATA}}}}\n\n{LIST_INSTRUCTION}"
        ),
        TemplateSlot::Difficulty { variant } => {
            let mut t = String::from(
                "Predict the difficulty of each programming question below as easy, medium or hard.\n\n",
            );
            if variant == PromptVariant::Total {
                t.push_str(
                    "There are 12 questions, evenly distributed across three difficulty levels \
                     (easy, medium, and hard): four questions per level.\n\n",
                );
            }
            t.push_str("Questions:\n{{QUESTIONS}}\n\n{{DATA}}\n\n");
            t.push_str("Answer with one line per question in the form \"<question id>: <easy|medium|hard>\".");
            t
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    texts: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            texts: TemplateSlot::all().into_iter().map(|s| (s.slug(), default_text(s))).collect(),
        }
    }
}

impl TemplateSet {
    /// Built-in texts overridden by any `<slug>.txt` present in `dir`.
    pub fn load_dir(dir: &Path) -> std::io::Result<TemplateSet> {
        let mut set = TemplateSet::default();
        for slot in TemplateSlot::all() {
            let path = dir.join(format!("{}.txt", slot.slug()));
            if path.is_file() {
                set.texts.insert(slot.slug(), std::fs::read_to_string(path)?);
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, slot: TemplateSlot, text: impl Into<String>) {
        self.texts.insert(slot.slug(), text.into());
    }

    pub fn text(&self, slot: TemplateSlot) -> &str {
        self.texts.get(&slot.slug()).map(String::as_str).unwrap_or("{{DATA}}")
    }

    /// Template text with the given placeholders substituted and any other
    /// `{{NAME}}` left untouched.
    pub fn render(&self, slot: TemplateSlot, values: &[(&str, &str)]) -> String {
        let mut out = self.text(slot).to_string();
        for (name, value) in values {
            out = out.replace(&format!("{{{{{name}}}}}"), value);
        }
        out
    }

    /// Header part of a rendered template: everything before `{{DATA}}`.
    pub fn header(&self, slot: TemplateSlot) -> &str {
        let t = self.text(slot);
        t.split("{{DATA}}").next().unwrap_or(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_slot_has_a_default() {
        let set = TemplateSet::default();
        for slot in TemplateSlot::all() {
            assert!(!set.text(slot).is_empty(), "{slot}");
        }
        assert_eq!(TemplateSlot::all().len(), 4 * 3 + 3 + 2);
    }

    #[test]
    fn mining_prompts_request_numbered_lists() {
        let set = TemplateSet::default();
        for stage in Stage::ALL {
            for level in PromptLevel::ALL {
                let t = set.text(TemplateSlot::Mining { stage, level });
                assert!(t.trim_end().ends_with(LIST_INSTRUCTION));
                assert!(t.contains("{{DATA}}"));
            }
        }
    }

    #[test]
    fn levels_differ_in_background() {
        let set = TemplateSet::default();
        let slot = |level| TemplateSlot::Mining { stage: Stage::Horizontal, level };
        assert!(set.text(slot(PromptLevel::Detailed)).contains("Focus on"));
        assert!(set.text(slot(PromptLevel::SemiDetailed)).contains("250 Hz"));
        assert!(!set.text(slot(PromptLevel::SemiDetailed)).contains("Focus on"));
        assert!(!set.text(slot(PromptLevel::Brief)).contains("250 Hz"));
    }

    #[test]
    fn render_substitutes() {
        let mut set = TemplateSet::default();
        set.set(TemplateSlot::Anomaly, "A {{DATA}} B {{OTHER}}");
        assert_eq!(set.render(TemplateSlot::Anomaly, &[("DATA", "x")]), "A x B {{OTHER}}");
    }

    #[test]
    fn directory_override() {
        let dir = std::env::temp_dir().join(format!("gazelens-tpl-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("h_brief.txt"), "custom {{DATA}}").unwrap();
        let set = TemplateSet::load_dir(&dir).unwrap();
        let slot = TemplateSlot::Mining { stage: Stage::Horizontal, level: PromptLevel::Brief };
        assert_eq!(set.text(slot), "custom {{DATA}}");
        std::fs::remove_dir_all(dir).unwrap();
    }
}

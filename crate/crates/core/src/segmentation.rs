//! Two-dimensional splitting of a gaze table into LLM payloads.
//!
//! The horizontal path turns every row into one JSON object. The vertical
//! path pairs each id column with each numeric column into a series of
//! `[id, value]` tuples. Payloads are serialized canonically (sorted keys,
//! shortest round-trip reals) and packed greedily into prompt chunks under a
//! character budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::short_digest;
use crate::gaze_data::{write_delimited, ColumnKind, Delimiter, GazeTable, Value};
use crate::pattern_miner::BehavioralPattern;
use crate::templates::{TemplateSet, TemplateSlot};

/// Default character budget for the data part of one prompt chunk.
pub const DEFAULT_CHUNK_BUDGET: usize = 12_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SegmentationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("payload {label} is {size} characters, over the {budget}-character budget")]
    Oversize { label: String, size: usize, budget: usize },
    #[error("bundle precondition: {0}")]
    Precondition(String),
}

/// Analysis module a prompt belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Raw table, no segmentation.
    Direct,
    Horizontal,
    Vertical,
    /// Merge of horizontal and vertical results.
    Combined,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Direct, Stage::Horizontal, Stage::Vertical, Stage::Combined];
    pub const MODULES: [Stage; 3] = [Stage::Combined, Stage::Horizontal, Stage::Vertical];

    pub fn slug(self) -> &'static str {
        match self {
            Stage::Direct => "direct",
            Stage::Horizontal => "h",
            Stage::Vertical => "v",
            Stage::Combined => "hv",
        }
    }

    /// Row-label form used in report grids.
    pub fn label(self) -> &'static str {
        match self {
            Stage::Direct => "Directly",
            Stage::Horizontal => "h",
            Stage::Vertical => "v",
            Stage::Combined => "h+v",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" | "directly" => Ok(Stage::Direct),
            "h" | "horizontal" => Ok(Stage::Horizontal),
            "v" | "vertical" => Ok(Stage::Vertical),
            "hv" | "h+v" | "combined" | "hv_merge" => Ok(Stage::Combined),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLevel {
    /// Data background plus the analytical focus.
    Detailed,
    /// Data background only.
    SemiDetailed,
    /// Neither.
    Brief,
}

impl PromptLevel {
    pub const ALL: [PromptLevel; 3] = [PromptLevel::Detailed, PromptLevel::SemiDetailed, PromptLevel::Brief];

    pub fn slug(self) -> &'static str {
        match self {
            PromptLevel::Detailed => "detailed",
            PromptLevel::SemiDetailed => "semi_detailed",
            PromptLevel::Brief => "brief",
        }
    }

    /// Report label: total / half / none.
    pub fn label(self) -> &'static str {
        match self {
            PromptLevel::Detailed => "total",
            PromptLevel::SemiDetailed => "half",
            PromptLevel::Brief => "none",
        }
    }
}

impl fmt::Display for PromptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "detailed" | "total" => Ok(PromptLevel::Detailed),
            "semi_detailed" | "half" => Ok(PromptLevel::SemiDetailed),
            "brief" | "none" => Ok(PromptLevel::Brief),
            other => Err(format!("unknown prompt level {other:?}")),
        }
    }
}

/// Anything that can be placed in a prompt chunk.
pub trait Payload {
    /// Short human-readable name used in errors.
    fn label(&self) -> String;
    /// Canonical serialized form as it appears in the prompt.
    fn canonical(&self) -> String;
    fn digest(&self) -> String {
        short_digest(self.canonical())
    }
}

/// One table row as a JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPayload {
    pub fields: BTreeMap<String, Value>,
    pub row_index: usize,
}

impl RowPayload {
    /// Parses the canonical form back into a field map.
    pub fn parse_fields(canonical: &str) -> serde_json::Result<BTreeMap<String, Value>> {
        serde_json::from_str(canonical)
    }
}

impl Payload for RowPayload {
    fn label(&self) -> String {
        format!("row {}", self.row_index)
    }

    fn canonical(&self) -> String {
        serde_json::to_string(&self.fields).expect("field map serializes")
    }
}

/// An id column paired with one numeric column across all rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnPairPayload {
    pub id_column: String,
    pub pairs: Vec<(Value, Value)>,
    pub value_column: String,
}

impl Payload for ColumnPairPayload {
    fn label(&self) -> String {
        format!("{}×{}", self.id_column, self.value_column)
    }

    fn canonical(&self) -> String {
        serde_json::to_string(self).expect("pair payload serializes")
    }
}

/// One raw delimited line, used by the unsegmented baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLinePayload {
    pub line_index: usize,
    pub line: String,
}

impl Payload for RawLinePayload {
    fn label(&self) -> String {
        format!("line {}", self.line_index)
    }

    fn canonical(&self) -> String {
        self.line.clone()
    }
}

/// One payload per row, in table order.
pub fn split_horizontal(table: &GazeTable) -> Vec<RowPayload> {
    (0..table.len())
        .map(|row| RowPayload { fields: table.row_values(row), row_index: row })
        .collect()
}

/// One payload per (id column × numeric column), id columns outermost, both
/// in schema order.
pub fn split_vertical(table: &GazeTable) -> Result<Vec<ColumnPairPayload>, SegmentationError> {
    let ids: Vec<&str> = table.schema.names_of_kind(ColumnKind::Id).collect();
    let numerics: Vec<&str> = table.schema.names_of_kind(ColumnKind::Numeric).collect();
    if ids.is_empty() {
        return Err(SegmentationError::Config("table has no id column".into()));
    }
    if numerics.is_empty() {
        return Err(SegmentationError::Config("table has no numeric column".into()));
    }
    let mut out = Vec::with_capacity(ids.len() * numerics.len());
    for id in &ids {
        for value in &numerics {
            let pairs = (0..table.len()).map(|r| (table.value(r, id), table.value(r, value))).collect();
            out.push(ColumnPairPayload { id_column: id.to_string(), pairs, value_column: value.to_string() });
        }
    }
    Ok(out)
}

/// Header line plus one payload per data line of the delimited rendering.
pub fn split_raw(table: &GazeTable) -> (String, Vec<RawLinePayload>) {
    let text = write_delimited(table, Delimiter::Comma);
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").to_string();
    let payloads = lines
        .enumerate()
        .map(|(i, l)| RawLinePayload { line_index: i, line: l.to_string() })
        .collect();
    (header, payloads)
}

/// Prompt chunks for one template slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub slot: TemplateSlot,
    /// Fully rendered prompts, template header included in each.
    pub chunks: Vec<String>,
    /// Digest of every payload placed in the chunks, in order.
    pub payload_digests: Vec<String>,
    pub carried_patterns: Option<Vec<BehavioralPattern>>,
}

impl PromptBundle {
    pub fn stage(&self) -> Option<Stage> {
        match self.slot {
            TemplateSlot::Mining { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub fn prompt_level(&self) -> Option<PromptLevel> {
        match self.slot {
            TemplateSlot::Mining { level, .. } => Some(level),
            _ => None,
        }
    }
}

/// Greedy packing of serialized payloads in order. Each chunk's data part
/// (payloads joined by newlines) stays within `budget` characters.
pub fn chunk_payloads(serialized: &[(String, String)], budget: usize) -> Result<Vec<Vec<&str>>, SegmentationError> {
    let mut chunks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut used = 0usize;
    for (label, text) in serialized {
        let size = text.chars().count();
        if size > budget {
            return Err(SegmentationError::Oversize { label: label.clone(), size, budget });
        }
        let extra = if current.is_empty() { size } else { size + 1 };
        if used + extra > budget {
            chunks.push(std::mem::take(&mut current));
            used = 0;
        }
        used += if current.is_empty() { size } else { size + 1 };
        current.push(text.as_str());
    }
    if !current.is_empty() || chunks.is_empty() {
        chunks.push(current);
    }
    Ok(chunks)
}

/// Renders carried patterns one per line as `- [id] text`, first occurrence
/// of each id only.
pub fn render_patterns(patterns: &[BehavioralPattern]) -> String {
    let mut seen = BTreeSet::new();
    patterns
        .iter()
        .filter(|p| seen.insert(p.id.clone()))
        .map(|p| format!("- [{}] {}", p.id, p.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Options for [`build_bundle`].
#[derive(Debug, Clone, Default)]
pub struct BundleOptions<'a> {
    pub carried_patterns: Option<&'a [BehavioralPattern]>,
    /// Extra placeholder values rendered into every chunk.
    pub context: Vec<(&'a str, String)>,
}

/// Packs payloads under `budget` and wraps every chunk in the slot's
/// template. Combined-stage bundles must carry patterns from both the
/// horizontal and the vertical stage.
pub fn build_bundle<P: Payload>(
    payloads: &[P],
    slot: TemplateSlot,
    templates: &TemplateSet,
    budget: usize,
    options: BundleOptions<'_>,
) -> Result<PromptBundle, SegmentationError> {
    if let TemplateSlot::Mining { stage: Stage::Combined, .. } = slot {
        let carried = options.carried_patterns.unwrap_or(&[]);
        for needed in [Stage::Horizontal, Stage::Vertical] {
            if !carried.iter().any(|p| p.stage == needed) {
                return Err(SegmentationError::Precondition(format!(
                    "combined bundle needs carried patterns from the {needed} stage"
                )));
            }
        }
    }
    let serialized: Vec<(String, String)> = payloads.iter().map(|p| (p.label(), p.canonical())).collect();
    let payload_digests = serialized.iter().map(|(_, s)| short_digest(s)).collect();
    let chunks = chunk_payloads(&serialized, budget)?;
    let patterns = options.carried_patterns.map(render_patterns).unwrap_or_default();

    let rendered = chunks
        .into_iter()
        .map(|parts| {
            let data = parts.join("\n");
            let mut values: Vec<(&str, &str)> = vec![("DATA", &data), ("PATTERNS", &patterns)];
            values.extend(options.context.iter().map(|(k, v)| (*k, v.as_str())));
            templates.render(slot, &values)
        })
        .collect();

    Ok(PromptBundle {
        slot,
        chunks: rendered,
        payload_digests,
        carried_patterns: options.carried_patterns.map(<[BehavioralPattern]>::to_vec),
    })
}

/// Writes payloads one canonical JSON document per line.
pub fn payloads_jsonl<P: Serialize>(payloads: &[P]) -> String {
    let mut out = String::new();
    for p in payloads {
        out.push_str(&serde_json::to_string(p).expect("payload serializes"));
        out.push('\n');
    }
    out
}

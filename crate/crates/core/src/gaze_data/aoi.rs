use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Aoi, AoiCategory, GazeDataError, GazeTable};

/// Axis-aligned rectangle `[x0, y0, x1, y1]` in normalized screen space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Rect { x0, y0, x1, y1 }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    /// Closed on all four edges.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiDefinition {
    pub name: String,
    pub question_id: String,
    pub rect: Rect,
    pub category: AoiCategory,
}

/// Region definitions plus the AOI given to points outside every region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiConfig {
    pub definitions: Vec<AoiDefinition>,
    pub default: Option<Aoi>,
}

impl AoiConfig {
    pub fn new(definitions: Vec<AoiDefinition>) -> Self {
        AoiConfig {
            definitions,
            default: Some(Aoi { name: "question_stem".into(), category: AoiCategory::NonError }),
        }
    }

    pub fn without_default(mut self) -> Self {
        self.default = None;
        self
    }
}

/// Reads the JSON array form `[{name, question_id, rect:[x0,y0,x1,y1], category}]`.
pub fn load_aoi_definitions(path: &Path) -> Result<Vec<AoiDefinition>, GazeDataError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| GazeDataError::AoiConfig(format!("{}: {e}", path.display())))
}

/// Labels every record with the first declared region (for its question)
/// containing its gaze point, falling back to the configured default.
///
/// The input records are kept in the output's provenance as the unclassified
/// copy.
pub fn annotate_aoi(table: &GazeTable, config: &AoiConfig) -> Result<GazeTable, GazeDataError> {
    for d in &config.definitions {
        if d.rect.area() <= 0.0 {
            return Err(GazeDataError::AoiConfig(format!(
                "region {:?} for {} has no area",
                d.name, d.question_id
            )));
        }
    }
    let mut by_question: BTreeMap<&str, Vec<&AoiDefinition>> = BTreeMap::new();
    for d in &config.definitions {
        by_question.entry(d.question_id.as_str()).or_default().push(d);
    }

    let mut records = table.records.clone();
    for (row, r) in records.iter_mut().enumerate() {
        let qid = r.question_id.as_deref().unwrap_or("");
        let regions = by_question.get(qid).map(Vec::as_slice).unwrap_or(&[]);
        if regions.is_empty() && config.default.is_none() {
            return Err(GazeDataError::AoiConfig(format!(
                "question {qid:?} has no AOI definitions and no default is declared"
            )));
        }
        let hit = match (r.gaze_x, r.gaze_y) {
            (Some(x), Some(y)) => regions.iter().find(|d| d.rect.contains(x, y)),
            _ => None,
        };
        r.aoi = match (hit, &config.default) {
            (Some(d), _) => Some(Aoi { name: d.name.clone(), category: d.category }),
            (None, Some(default)) => Some(default.clone()),
            (None, None) => {
                return Err(GazeDataError::AoiConfig(format!(
                    "row {row}: point outside every region of {qid:?} and no default is declared"
                )))
            }
        };
    }

    let mut out = table.with_records(records);
    out.schema = table.schema.with_aoi_columns();
    out.provenance.unclassified = Some(Arc::new(table.records.clone()));
    Ok(out)
}

//! Tabular gaze samples: ingestion, cleaning, AOI annotation and
//! sessionization into per-participant, per-question sequences.
//!
//! A [`GazeTable`] is an ordered list of [`GazeRecord`]s plus the column
//! schema they were read with. The core eye-tracking fields are typed on the
//! record; any further columns declared in the schema are carried as loosely
//! typed [`Value`]s in [`GazeRecord::extra`].

mod aoi;
mod clean;
mod parse;
mod schema;
mod session;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use aoi::{annotate_aoi, load_aoi_definitions, AoiConfig, AoiDefinition, Rect};
pub use clean::{clean, default_questions, CleanConfig, CleanReport};
pub use parse::{parse_gaze_csv, write_delimited, Delimiter};
pub use schema::{Column, ColumnKind, ColumnSchema, CoreField, FieldNames};
pub use session::{sessionize, Sequence, SequenceKey, Sessions, FEATURE_NAMES};

/// Number of features per record in a sessionized sequence.
pub const FEATURE_DIM: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum GazeDataError {
    #[error("schema error: header is missing columns {missing:?}")]
    MissingColumns { missing: Vec<String> },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("empty table: no data rows in input")]
    EmptyTable,
    #[error("malformed delimited input at line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("cleaning dropped every row ({report})")]
    AllRowsDropped { report: CleanReport },
    #[error("AOI configuration error: {0}")]
    AoiConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A loosely typed cell value for non-core columns and for payload building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Parses a cell of the given kind. Empty or unparseable numeric cells
    /// become [`Value::Null`].
    pub fn parse(raw: &str, kind: ColumnKind) -> Value {
        let raw = raw.trim();
        if raw.is_empty() {
            return Value::Null;
        }
        match kind {
            ColumnKind::Numeric => {
                if let Ok(i) = raw.parse::<i64>() {
                    Value::Int(i)
                } else {
                    match raw.parse::<f64>() {
                        Ok(f) if f.is_finite() => Value::Real(f),
                        _ => Value::Null,
                    }
                }
            }
            ColumnKind::Id | ColumnKind::Categorical => Value::Text(raw.to_string()),
        }
    }

    /// Delimited-text rendering; reals use the shortest representation that
    /// parses back to the same `f64` and always carry a decimal point or
    /// exponent so they re-read as reals.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Real(f) => fmt_real(*f),
            Value::Text(s) => s.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Real(f) => serde_json::Number::from_f64(*f)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => serde_json::Value::String(s.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(f) => Some(*f),
            _ => None,
        }
    }
}

pub(crate) fn fmt_real(f: f64) -> String {
    format!("{f:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Driver,
    Navigator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expertise {
    Student,
    Expert,
}

/// Error = the problem area of a question, NonError = the question stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AoiCategory {
    Error,
    NonError,
}

impl AoiCategory {
    pub const ALL: [AoiCategory; 2] = [AoiCategory::Error, AoiCategory::NonError];

    pub fn as_str(self) -> &'static str {
        match self {
            AoiCategory::Error => "Error",
            AoiCategory::NonError => "NonError",
        }
    }
}

impl fmt::Display for AoiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AoiCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "error" => Ok(AoiCategory::Error),
            "nonerror" => Ok(AoiCategory::NonError),
            other => Err(format!("unknown AOI category {other:?}")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Driver => "driver",
            Role::Navigator => "navigator",
        })
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "driver" => Ok(Role::Driver),
            "navigator" => Ok(Role::Navigator),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

impl fmt::Display for Expertise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expertise::Student => "student",
            Expertise::Expert => "expert",
        })
    }
}

impl FromStr for Expertise {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "student" => Ok(Expertise::Student),
            "expert" => Ok(Expertise::Expert),
            other => Err(format!("unknown expertise {other:?}")),
        }
    }
}

/// Named AOI assigned to a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aoi {
    pub name: String,
    pub category: AoiCategory,
}

/// One gaze sample. `None` marks a missing or unparseable cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeRecord {
    pub participant_id: Option<String>,
    pub role: Option<Role>,
    pub expertise: Option<Expertise>,
    pub question_id: Option<String>,
    pub timestamp_ms: Option<u64>,
    pub fixation_number: Option<u64>,
    pub fixation_duration_ms: Option<f64>,
    pub saccade_number: Option<u64>,
    pub saccade_duration_ms: Option<f64>,
    pub gaze_x: Option<f64>,
    pub gaze_y: Option<f64>,
    pub aoi: Option<Aoi>,
    /// Non-core columns keyed by column name.
    pub extra: BTreeMap<String, Value>,
}

impl GazeRecord {
    /// `(fixation_duration_ms, saccade_duration_ms, gaze_x, gaze_y)` when all
    /// four are present.
    pub fn features(&self) -> Option<[f64; FEATURE_DIM]> {
        Some([
            self.fixation_duration_ms?,
            self.saccade_duration_ms?,
            self.gaze_x?,
            self.gaze_y?,
        ])
    }

    pub fn core_value(&self, field: CoreField) -> Value {
        fn text(v: &Option<String>) -> Value {
            v.clone().map(Value::Text).unwrap_or(Value::Null)
        }
        fn int(v: Option<u64>) -> Value {
            v.map(|i| Value::Int(i as i64)).unwrap_or(Value::Null)
        }
        fn real(v: Option<f64>) -> Value {
            v.map(Value::Real).unwrap_or(Value::Null)
        }
        match field {
            CoreField::ParticipantId => text(&self.participant_id),
            CoreField::Role => self.role.map(|r| Value::Text(r.to_string())).unwrap_or(Value::Null),
            CoreField::Expertise => self
                .expertise
                .map(|e| Value::Text(e.to_string()))
                .unwrap_or(Value::Null),
            CoreField::QuestionId => text(&self.question_id),
            CoreField::TimestampMs => int(self.timestamp_ms),
            CoreField::FixationNumber => int(self.fixation_number),
            CoreField::FixationDurationMs => real(self.fixation_duration_ms),
            CoreField::SaccadeNumber => int(self.saccade_number),
            CoreField::SaccadeDurationMs => real(self.saccade_duration_ms),
            CoreField::GazeX => real(self.gaze_x),
            CoreField::GazeY => real(self.gaze_y),
            CoreField::Aoi => self
                .aoi
                .as_ref()
                .map(|a| Value::Text(a.name.clone()))
                .unwrap_or(Value::Null),
            CoreField::AoiCategory => self
                .aoi
                .as_ref()
                .map(|a| Value::Text(a.category.to_string()))
                .unwrap_or(Value::Null),
        }
    }

    pub(crate) fn set_core(&mut self, field: CoreField, raw: &str) {
        let raw = raw.trim();
        let non_empty = (!raw.is_empty()).then_some(raw);
        let real = |s: Option<&str>| s.and_then(|s| s.parse::<f64>().ok()).filter(|f| f.is_finite());
        let uint = |s: Option<&str>| s.and_then(|s| s.parse::<u64>().ok());
        match field {
            CoreField::ParticipantId => self.participant_id = non_empty.map(str::to_string),
            CoreField::Role => self.role = non_empty.and_then(|s| s.parse().ok()),
            CoreField::Expertise => self.expertise = non_empty.and_then(|s| s.parse().ok()),
            CoreField::QuestionId => self.question_id = non_empty.map(str::to_string),
            CoreField::TimestampMs => self.timestamp_ms = uint(non_empty),
            CoreField::FixationNumber => self.fixation_number = uint(non_empty),
            CoreField::FixationDurationMs => self.fixation_duration_ms = real(non_empty),
            CoreField::SaccadeNumber => self.saccade_number = uint(non_empty),
            CoreField::SaccadeDurationMs => self.saccade_duration_ms = real(non_empty),
            CoreField::GazeX => self.gaze_x = real(non_empty),
            CoreField::GazeY => self.gaze_y = real(non_empty),
            CoreField::Aoi => {
                if let Some(name) = non_empty {
                    let category = self.aoi.as_ref().map_or(AoiCategory::NonError, |a| a.category);
                    self.aoi = Some(Aoi { name: name.to_string(), category });
                }
            }
            CoreField::AoiCategory => {
                if let Some(category) = non_empty.and_then(|s| s.parse::<AoiCategory>().ok()) {
                    match &mut self.aoi {
                        Some(aoi) => aoi.category = category,
                        None => self.aoi = Some(Aoi { name: category.to_string(), category }),
                    }
                }
            }
        }
    }
}

/// Where a table came from and what happened to it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub source: String,
    pub delimiter: Delimiter,
    pub clean_report: Option<CleanReport>,
    /// The cleaned table as it was before AOI annotation.
    pub unclassified: Option<Arc<Vec<GazeRecord>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeTable {
    pub schema: ColumnSchema,
    pub records: Vec<GazeRecord>,
    pub provenance: Provenance,
}

impl GazeTable {
    pub fn new(schema: ColumnSchema, records: Vec<GazeRecord>, source: impl Into<String>) -> Self {
        GazeTable {
            schema,
            records,
            provenance: Provenance { source: source.into(), ..Provenance::default() },
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Value of `column` on row `row`; `Null` for unknown columns.
    pub fn value(&self, row: usize, column: &str) -> Value {
        let record = &self.records[row];
        match self.schema.core_field(column) {
            Some(field) => record.core_value(field),
            None => record.extra.get(column).cloned().unwrap_or(Value::Null),
        }
    }

    /// Column-name → value map for one row, covering every schema column.
    pub fn row_values(&self, row: usize) -> BTreeMap<String, Value> {
        self.schema
            .columns()
            .iter()
            .map(|c| (c.name.clone(), self.value(row, &c.name)))
            .collect()
    }

    /// Same schema, records replaced.
    pub fn with_records(&self, records: Vec<GazeRecord>) -> GazeTable {
        GazeTable { schema: self.schema.clone(), records, provenance: self.provenance.clone() }
    }
}

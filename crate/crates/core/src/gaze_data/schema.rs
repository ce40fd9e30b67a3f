use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GazeDataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Id,
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column { name: name.into(), kind }
    }
}

/// The typed fields of a [`super::GazeRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoreField {
    ParticipantId,
    Role,
    Expertise,
    QuestionId,
    TimestampMs,
    FixationNumber,
    FixationDurationMs,
    SaccadeNumber,
    SaccadeDurationMs,
    GazeX,
    GazeY,
    Aoi,
    AoiCategory,
}

impl CoreField {
    pub const ALL: [CoreField; 13] = [
        CoreField::ParticipantId,
        CoreField::Role,
        CoreField::Expertise,
        CoreField::QuestionId,
        CoreField::TimestampMs,
        CoreField::FixationNumber,
        CoreField::FixationDurationMs,
        CoreField::SaccadeNumber,
        CoreField::SaccadeDurationMs,
        CoreField::GazeX,
        CoreField::GazeY,
        CoreField::Aoi,
        CoreField::AoiCategory,
    ];

    pub fn kind(self) -> ColumnKind {
        match self {
            CoreField::ParticipantId | CoreField::QuestionId => ColumnKind::Id,
            CoreField::Role | CoreField::Expertise | CoreField::Aoi | CoreField::AoiCategory => {
                ColumnKind::Categorical
            }
            _ => ColumnKind::Numeric,
        }
    }

    /// AOI columns only exist after annotation.
    pub fn required(self) -> bool {
        !matches!(self, CoreField::Aoi | CoreField::AoiCategory)
    }
}

/// Column names of the core fields in the source export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldNames {
    pub participant_id: String,
    pub role: String,
    pub expertise: String,
    pub question_id: String,
    pub timestamp_ms: String,
    pub fixation_number: String,
    pub fixation_duration_ms: String,
    pub saccade_number: String,
    pub saccade_duration_ms: String,
    pub gaze_x: String,
    pub gaze_y: String,
    pub aoi: String,
    pub aoi_category: String,
}

impl Default for FieldNames {
    fn default() -> Self {
        FieldNames {
            participant_id: "participant_id".into(),
            role: "role".into(),
            expertise: "expertise".into(),
            question_id: "question_id".into(),
            timestamp_ms: "timestamp_ms".into(),
            fixation_number: "fixation_number".into(),
            fixation_duration_ms: "fixation_duration_ms".into(),
            saccade_number: "saccade_number".into(),
            saccade_duration_ms: "saccade_duration_ms".into(),
            gaze_x: "gaze_x".into(),
            gaze_y: "gaze_y".into(),
            aoi: "aoi".into(),
            aoi_category: "aoi_category".into(),
        }
    }
}

impl FieldNames {
    pub fn name(&self, field: CoreField) -> &str {
        match field {
            CoreField::ParticipantId => &self.participant_id,
            CoreField::Role => &self.role,
            CoreField::Expertise => &self.expertise,
            CoreField::QuestionId => &self.question_id,
            CoreField::TimestampMs => &self.timestamp_ms,
            CoreField::FixationNumber => &self.fixation_number,
            CoreField::FixationDurationMs => &self.fixation_duration_ms,
            CoreField::SaccadeNumber => &self.saccade_number,
            CoreField::SaccadeDurationMs => &self.saccade_duration_ms,
            CoreField::GazeX => &self.gaze_x,
            CoreField::GazeY => &self.gaze_y,
            CoreField::Aoi => &self.aoi,
            CoreField::AoiCategory => &self.aoi_category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct ColumnSchema {
    columns: Vec<Column>,
    fields: FieldNames,
    core_by_name: BTreeMap<String, CoreField>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    columns: Vec<Column>,
    #[serde(default)]
    fields: FieldNames,
}

impl TryFrom<SchemaRepr> for ColumnSchema {
    type Error = GazeDataError;
    fn try_from(r: SchemaRepr) -> Result<Self, Self::Error> {
        ColumnSchema::new(r.columns, r.fields)
    }
}

impl From<ColumnSchema> for SchemaRepr {
    fn from(s: ColumnSchema) -> Self {
        SchemaRepr { columns: s.columns, fields: s.fields }
    }
}

impl Default for ColumnSchema {
    /// The eleven core columns under their default names.
    fn default() -> Self {
        let fields = FieldNames::default();
        let columns = CoreField::ALL
            .iter()
            .filter(|f| f.required())
            .map(|f| Column::new(fields.name(*f), f.kind()))
            .collect();
        ColumnSchema::new(columns, fields).expect("default schema is valid")
    }
}

impl ColumnSchema {
    /// Validates that column names are unique, every required core field is
    /// present with its expected kind, and at least one id column exists.
    pub fn new(columns: Vec<Column>, fields: FieldNames) -> Result<Self, GazeDataError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(GazeDataError::Schema(format!("duplicate column {:?}", c.name)));
            }
        }
        let mut core_by_name = BTreeMap::new();
        for field in CoreField::ALL {
            let name = fields.name(field);
            match columns.iter().find(|c| c.name == name) {
                Some(c) => {
                    if c.kind != field.kind() {
                        return Err(GazeDataError::Schema(format!(
                            "column {:?} must be {:?}, declared {:?}",
                            name,
                            field.kind(),
                            c.kind
                        )));
                    }
                    core_by_name.insert(name.to_string(), field);
                }
                None if field.required() => {
                    return Err(GazeDataError::Schema(format!("required column {name:?} not declared")));
                }
                None => {}
            }
        }
        if !columns.iter().any(|c| c.kind == ColumnKind::Id) {
            return Err(GazeDataError::Schema("schema has no id column".into()));
        }
        Ok(ColumnSchema { columns, fields, core_by_name })
    }

    /// Default schema plus extra columns appended in the given order.
    pub fn with_extra(extra: impl IntoIterator<Item = Column>) -> Result<Self, GazeDataError> {
        let base = ColumnSchema::default();
        let mut columns = base.columns;
        columns.extend(extra);
        ColumnSchema::new(columns, base.fields)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn fields(&self) -> &FieldNames {
        &self.fields
    }

    pub fn core_field(&self, column: &str) -> Option<CoreField> {
        self.core_by_name.get(column).copied()
    }

    pub fn kind(&self, column: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.kind)
    }

    pub fn names_of_kind(&self, kind: ColumnKind) -> impl Iterator<Item = &str> {
        self.columns.iter().filter(move |c| c.kind == kind).map(|c| c.name.as_str())
    }

    pub fn has_aoi(&self) -> bool {
        self.core_by_name.values().any(|f| *f == CoreField::Aoi)
    }

    /// Appends the AOI name and category columns if they are not declared.
    pub fn with_aoi_columns(&self) -> ColumnSchema {
        let mut columns = self.columns.clone();
        for field in [CoreField::Aoi, CoreField::AoiCategory] {
            let name = self.fields.name(field);
            if !columns.iter().any(|c| c.name == name) {
                columns.push(Column::new(name, field.kind()));
            }
        }
        ColumnSchema::new(columns, self.fields.clone()).expect("adding AOI columns keeps schema valid")
    }
}

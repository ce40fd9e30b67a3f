use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{ColumnSchema, GazeDataError, GazeRecord, GazeTable, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }

    /// Tab if the header line contains a tab, comma otherwise.
    pub fn detect(header_line: &str) -> Delimiter {
        if header_line.contains('\t') {
            Delimiter::Tab
        } else {
            Delimiter::Comma
        }
    }
}

/// Reads a delimited export with a header row. Columns are matched by name;
/// header columns outside the schema are ignored. Unparseable cells are kept
/// as missing rather than zeroed.
pub fn parse_gaze_csv<R: Read>(mut source: R, schema: &ColumnSchema) -> Result<GazeTable, GazeDataError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let header_line = text.lines().next().unwrap_or("");
    if header_line.trim().is_empty() {
        return Err(GazeDataError::EmptyTable);
    }
    let delimiter = Delimiter::detect(header_line);

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.byte())
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| GazeDataError::Malformed { line: 1, message: e.to_string() })?
        .clone();

    let mut positions = Vec::with_capacity(schema.columns().len());
    let mut missing = Vec::new();
    for column in schema.columns() {
        match headers.iter().position(|h| h == column.name) {
            Some(i) => positions.push((i, column)),
            None => missing.push(column.name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(GazeDataError::MissingColumns { missing });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| GazeDataError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let mut record = GazeRecord::default();
        for (i, column) in &positions {
            let raw = row.get(*i).unwrap_or("");
            match schema.core_field(&column.name) {
                Some(field) => record.set_core(field, raw),
                None => {
                    record.extra.insert(column.name.clone(), Value::parse(raw, column.kind));
                }
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(GazeDataError::EmptyTable);
    }
    let mut table = GazeTable::new(schema.clone(), records, "<stream>");
    table.provenance.delimiter = delimiter;
    Ok(table)
}

/// Renders the table in its schema's column order. Identical tables give
/// identical bytes.
pub fn write_delimited(table: &GazeTable, delimiter: Delimiter) -> String {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter.byte())
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let names: Vec<&str> = table.schema.columns().iter().map(|c| c.name.as_str()).collect();
    writer.write_record(&names).expect("in-memory write");
    for row in 0..table.len() {
        let cells: Vec<String> = names.iter().map(|n| table.value(row, n).to_cell()).collect();
        writer.write_record(&cells).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze_data::{Column, ColumnKind, Expertise, Role};

    const HEADER: &str = "participant_id,role,expertise,question_id,timestamp_ms,fixation_number,fixation_duration_ms,saccade_number,saccade_duration_ms,gaze_x,gaze_y";

    fn sample(rows: &[&str]) -> String {
        let mut s = String::from(HEADER);
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    #[test]
    fn three_valid_rows() {
        let text = sample(&[
            "P01,driver,student,A1,0,1,210.5,1,30.0,0.5,0.5",
            "P01,driver,student,A1,4,2,180.0,2,22.5,0.52,0.48",
            "P02,navigator,expert,A2,0,1,250,1,40,0.1,0.9",
        ]);
        let t = parse_gaze_csv(text.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(t.len(), 3);
        let r = &t.records[2];
        assert_eq!(r.participant_id.as_deref(), Some("P02"));
        assert_eq!(r.role, Some(Role::Navigator));
        assert_eq!(r.expertise, Some(Expertise::Expert));
        assert_eq!(r.fixation_duration_ms, Some(250.0));
        assert_eq!(t.provenance.delimiter, Delimiter::Comma);
    }

    #[test]
    fn empty_cell_is_missing_not_zero() {
        let text = sample(&["P01,driver,student,A1,0,1,,1,30.0,0.5,0.5"]);
        let t = parse_gaze_csv(text.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(t.records[0].fixation_duration_ms, None);
        assert!(t.records[0].features().is_none());
    }

    #[test]
    fn garbage_numeric_cell_is_missing() {
        let text = sample(&["P01,driver,student,A1,0,1,abc,1,NaN,0.5,0.5"]);
        let t = parse_gaze_csv(text.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(t.records[0].fixation_duration_ms, None);
        assert_eq!(t.records[0].saccade_duration_ms, None);
    }

    #[test]
    fn header_mismatch_names_missing_columns() {
        let text = "participant_id,role,expertise,question_id,timestamp_ms\nP01,driver,student,A1,0\n";
        match parse_gaze_csv(text.as_bytes(), &ColumnSchema::default()) {
            Err(GazeDataError::MissingColumns { missing }) => {
                assert!(missing.contains(&"gaze_x".to_string()));
                assert!(missing.contains(&"fixation_duration_ms".to_string()));
                assert!(!missing.contains(&"role".to_string()));
            }
            other => panic!("expected MissingColumns, got {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            parse_gaze_csv("".as_bytes(), &ColumnSchema::default()),
            Err(GazeDataError::EmptyTable)
        ));
        assert!(matches!(
            parse_gaze_csv(sample(&[]).as_bytes(), &ColumnSchema::default()),
            Err(GazeDataError::EmptyTable)
        ));
    }

    #[test]
    fn tab_detection_and_byte_stable_rewrite() {
        let schema = ColumnSchema::with_extra([
            Column::new("pupil_mm", ColumnKind::Numeric),
            Column::new("session", ColumnKind::Categorical),
        ])
        .unwrap();
        let text = format!(
            "{}\tpupil_mm\tsession\nP01\tdriver\tstudent\tA1\t0\t1\t210.5\t1\t30.0\t0.5\t0.25\t3.0\tam\n",
            HEADER.replace(',', "\t")
        );
        let t = parse_gaze_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(t.provenance.delimiter, Delimiter::Tab);
        assert_eq!(t.records[0].extra["pupil_mm"], Value::Real(3.0));
        let out = write_delimited(&t, Delimiter::Tab);
        let again = parse_gaze_csv(out.as_bytes(), &schema).unwrap();
        assert_eq!(again.records, t.records);
        assert_eq!(write_delimited(&again, Delimiter::Tab), out);
    }
}

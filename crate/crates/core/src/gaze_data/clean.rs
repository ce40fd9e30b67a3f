use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, CoreField, GazeDataError, GazeRecord, GazeTable};

/// Thresholds for [`clean`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub min_fix_ms: f64,
    pub max_fix_ms: f64,
    /// Question ids belonging to the experiment; rows outside it are
    /// irrelevant. `None` keeps every question.
    pub questions: Option<BTreeSet<String>>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            min_fix_ms: 50.0,
            max_fix_ms: 2000.0,
            questions: Some(default_questions().into_iter().collect()),
        }
    }
}

/// `A1`..`D3`, the twelve task questions in presentation order.
pub fn default_questions() -> Vec<String> {
    ["A", "B", "C", "D"]
        .iter()
        .flat_map(|l| (1..=3).map(move |d| format!("{l}{d}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_in: usize,
    pub rows_out: usize,
    pub dropped_missing: usize,
    /// Out-of-range durations plus repeated timestamps within a sequence.
    pub dropped_noise: usize,
    pub dropped_irrelevant: usize,
}

impl CleanReport {
    pub fn dropped(&self) -> usize {
        self.dropped_missing + self.dropped_noise + self.dropped_irrelevant
    }
}

impl fmt::Display for CleanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rows_in={} rows_out={} missing={} noise={} irrelevant={}",
            self.rows_in, self.rows_out, self.dropped_missing, self.dropped_noise, self.dropped_irrelevant
        )
    }
}

fn has_missing(table: &GazeTable, r: &GazeRecord) -> bool {
    let core_missing = CoreField::ALL
        .iter()
        .filter(|f| f.required())
        .any(|f| r.core_value(*f).is_null());
    core_missing
        || table
            .schema
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::Numeric && table.schema.core_field(&c.name).is_none())
            .any(|c| r.extra.get(&c.name).is_none_or(|v| v.is_null()))
}

/// Applies the rules in order (missing, irrelevant, noise, duplicate
/// timestamps) and counts each dropped row under the first rule it fails.
///
/// Within each `(participant_id, question_id)` sequence the surviving records
/// are re-sorted by timestamp into the row positions that sequence occupies,
/// so interleaving between sequences is preserved and an already clean table
/// comes back unchanged.
pub fn clean(table: &GazeTable, cfg: &CleanConfig) -> Result<(GazeTable, CleanReport), GazeDataError> {
    let mut report = CleanReport { rows_in: table.len(), ..CleanReport::default() };
    let mut sequences: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();

    for (i, r) in table.records.iter().enumerate() {
        if has_missing(table, r) {
            report.dropped_missing += 1;
            continue;
        }
        let (Some(pid), Some(qid)) = (r.participant_id.as_deref(), r.question_id.as_deref()) else {
            unreachable!("missing ids are caught above");
        };
        if cfg.questions.as_ref().is_some_and(|q| !q.contains(qid)) {
            report.dropped_irrelevant += 1;
            continue;
        }
        let fix = r.fixation_duration_ms.unwrap_or(f64::NAN);
        let sac = r.saccade_duration_ms.unwrap_or(f64::NAN);
        if !(cfg.min_fix_ms..=cfg.max_fix_ms).contains(&fix) || sac.is_nan() || sac < 0.0 {
            report.dropped_noise += 1;
            continue;
        }
        sequences.entry((pid, qid)).or_default().push(i);
    }

    let mut placed: Vec<(usize, usize)> = Vec::new();
    for rows in sequences.values() {
        // timestamp -> last row carrying it
        let mut by_time: BTreeMap<u64, usize> = BTreeMap::new();
        for &i in rows {
            let ts = table.records[i].timestamp_ms.expect("checked above");
            if by_time.insert(ts, i).is_some() {
                report.dropped_noise += 1;
            }
        }
        let mut slots: Vec<usize> = by_time.values().copied().collect();
        slots.sort_unstable();
        placed.extend(slots.into_iter().zip(by_time.into_values()));
    }
    placed.sort_unstable();

    report.rows_out = placed.len();
    if placed.is_empty() {
        return Err(GazeDataError::AllRowsDropped { report });
    }
    let records = placed.into_iter().map(|(_, src)| table.records[src].clone()).collect();
    let mut out = table.with_records(records);
    out.provenance.clean_report = Some(report);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze_data::{ColumnSchema, Expertise, Role};

    fn rec(pid: &str, qid: &str, ts: u64, fix: Option<f64>) -> GazeRecord {
        GazeRecord {
            participant_id: Some(pid.into()),
            role: Some(Role::Driver),
            expertise: Some(Expertise::Student),
            question_id: Some(qid.into()),
            timestamp_ms: Some(ts),
            fixation_number: Some(ts),
            fixation_duration_ms: fix,
            saccade_number: Some(ts),
            saccade_duration_ms: Some(20.0),
            gaze_x: Some(0.5),
            gaze_y: Some(0.5),
            ..GazeRecord::default()
        }
    }

    fn table(records: Vec<GazeRecord>) -> GazeTable {
        GazeTable::new(ColumnSchema::default(), records, "test")
    }

    #[test]
    fn one_missing_among_ten() {
        let mut rs: Vec<_> = (0..10).map(|i| rec("P1", "A1", i * 4, Some(200.0))).collect();
        rs[3].fixation_duration_ms = None;
        let (out, rep) = clean(&table(rs), &CleanConfig::default()).unwrap();
        assert_eq!(out.len(), 9);
        assert_eq!(rep.dropped_missing, 1);
        assert_eq!(rep.rows_out + rep.dropped(), rep.rows_in);
    }

    #[test]
    fn short_fixation_is_noise() {
        let rs = vec![rec("P1", "A1", 0, Some(5.0)), rec("P1", "A1", 4, Some(200.0))];
        let (_, rep) = clean(&table(rs), &CleanConfig::default()).unwrap();
        assert_eq!(rep.dropped_noise, 1);
        assert_eq!(rep.rows_out, 1);
    }

    #[test]
    fn thresholds_are_inclusive() {
        let rs = vec![rec("P1", "A1", 0, Some(50.0)), rec("P1", "A1", 4, Some(2000.0)), rec("P1", "A1", 8, Some(2000.5))];
        let (_, rep) = clean(&table(rs), &CleanConfig::default()).unwrap();
        assert_eq!(rep.rows_out, 2);
    }

    #[test]
    fn unknown_question_is_irrelevant() {
        let rs = vec![rec("P1", "Z9", 0, Some(200.0)), rec("P1", "A1", 0, Some(200.0))];
        let (_, rep) = clean(&table(rs), &CleanConfig::default()).unwrap();
        assert_eq!(rep.dropped_irrelevant, 1);
    }

    #[test]
    fn duplicate_timestamp_keeps_later_row() {
        let mut later = rec("P1", "A1", 4, Some(300.0));
        later.gaze_x = Some(0.9);
        let rs = vec![rec("P1", "A1", 0, Some(200.0)), rec("P1", "A1", 4, Some(200.0)), later.clone()];
        let (out, rep) = clean(&table(rs), &CleanConfig::default()).unwrap();
        assert_eq!(rep.dropped_noise, 1);
        assert_eq!(out.records[1], later);
    }

    #[test]
    fn out_of_order_sequence_is_sorted_in_place() {
        let rs = vec![
            rec("P1", "A1", 8, Some(200.0)),
            rec("P2", "A1", 0, Some(200.0)),
            rec("P1", "A1", 4, Some(200.0)),
        ];
        let (out, _) = clean(&table(rs), &CleanConfig::default()).unwrap();
        let order: Vec<_> = out
            .records
            .iter()
            .map(|r| (r.participant_id.clone().unwrap(), r.timestamp_ms.unwrap()))
            .collect();
        assert_eq!(order, vec![("P1".into(), 4), ("P2".into(), 0), ("P1".into(), 8)]);
    }

    #[test]
    fn already_clean_is_identity() {
        let rs: Vec<_> = (0..5).map(|i| rec("P1", "B2", i * 4, Some(100.0 + i as f64))).collect();
        let t = table(rs);
        let (out, rep) = clean(&t, &CleanConfig::default()).unwrap();
        assert_eq!(out.records, t.records);
        assert_eq!(rep.dropped(), 0);
    }

    #[test]
    fn everything_dropped_carries_report() {
        let rs = vec![rec("P1", "A1", 0, None)];
        match clean(&table(rs), &CleanConfig::default()) {
            Err(GazeDataError::AllRowsDropped { report }) => assert_eq!(report.dropped_missing, 1),
            other => panic!("{other:?}"),
        }
    }
}

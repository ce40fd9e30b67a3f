use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AoiCategory, Expertise, GazeTable, Role, FEATURE_DIM};

/// Names of the per-record feature vector entries, in order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] =
    ["fixation_duration_ms", "saccade_duration_ms", "gaze_x", "gaze_y"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceKey {
    pub participant_id: String,
    pub question_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub key: SequenceKey,
    pub expertise: Option<Expertise>,
    pub role: Option<Role>,
    /// Source row indices in timestamp order.
    pub rows: Vec<usize>,
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub aoi: Vec<Option<AoiCategory>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sessions {
    pub sequences: BTreeMap<SequenceKey, Sequence>,
    /// Rows skipped for lacking ids or feature values; empty on a cleaned
    /// table.
    pub incomplete: Vec<usize>,
}

impl Sessions {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_records(&self) -> usize {
        self.sequences.values().map(Sequence::len).sum()
    }

    pub fn by_expertise(&self, expertise: Expertise) -> impl Iterator<Item = &Sequence> {
        self.sequences.values().filter(move |s| s.expertise == Some(expertise))
    }
}

/// Partitions the table by `(participant_id, question_id)`; each sequence is
/// ordered by timestamp (stable for equal stamps).
pub fn sessionize(table: &GazeTable) -> Sessions {
    let mut out = Sessions::default();
    for (i, r) in table.records.iter().enumerate() {
        let (Some(pid), Some(qid), Some(features)) =
            (r.participant_id.as_ref(), r.question_id.as_ref(), r.features())
        else {
            out.incomplete.push(i);
            continue;
        };
        let key = SequenceKey { participant_id: pid.clone(), question_id: qid.clone() };
        let seq = out.sequences.entry(key.clone()).or_insert_with(|| Sequence {
            key,
            expertise: r.expertise,
            role: r.role,
            rows: Vec::new(),
            features: Vec::new(),
            aoi: Vec::new(),
        });
        seq.rows.push(i);
        seq.features.push(features);
        seq.aoi.push(r.aoi.as_ref().map(|a| a.category));
    }
    if !out.incomplete.is_empty() {
        log::warn!("sessionize skipped {} incomplete rows", out.incomplete.len());
    }
    for seq in out.sequences.values_mut() {
        let mut order: Vec<usize> = (0..seq.rows.len()).collect();
        order.sort_by_key(|&k| table.records[seq.rows[k]].timestamp_ms.unwrap_or(u64::MAX));
        seq.rows = order.iter().map(|&k| seq.rows[k]).collect();
        seq.features = order.iter().map(|&k| seq.features[k]).collect();
        seq.aoi = order.iter().map(|&k| seq.aoi[k]).collect();
    }
    out
}

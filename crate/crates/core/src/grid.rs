//! Row × column result tables with missing cells, rendered tab-delimited.

use serde::{Deserialize, Serialize};

use crate::segmentation::{PromptLevel, Stage};

/// Rows of the consistency grid: the unsegmented baseline, then every
/// module at every prompt level.
pub fn trust_rows() -> Vec<String> {
    let mut rows = vec!["Directly".to_string()];
    for level in PromptLevel::ALL {
        for stage in Stage::MODULES {
            rows.push(row_label(stage, level));
        }
    }
    rows
}

/// Rows of the difficulty grid: the baseline and every module with the
/// full and the bare prompt.
pub fn difficulty_rows() -> Vec<String> {
    let mut rows = vec!["Directly(total)".to_string()];
    for level in [PromptLevel::Detailed, PromptLevel::Brief] {
        for stage in Stage::MODULES {
            rows.push(row_label(stage, level));
        }
    }
    rows
}

/// `h+v(total)`, `v(none)` and so on.
pub fn row_label(stage: Stage, level: PromptLevel) -> String {
    format!("{}({})", stage.label(), level.label())
}

pub const DEFAULT_COLUMNS: [&str; 3] = ["4o", "o1", "r1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `values[row][column]`, `None` rendered as `NA`.
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no {axis} labeled {label:?} in grid")]
pub struct UnknownLabel {
    pub axis: &'static str,
    pub label: String,
}

impl ExperimentGrid {
    pub fn new(rows: Vec<String>, columns: Vec<String>) -> Self {
        let values = vec![vec![None; columns.len()]; rows.len()];
        ExperimentGrid { rows, columns, values }
    }

    fn position(&self, row: &str, column: &str) -> Result<(usize, usize), UnknownLabel> {
        let r = self.rows.iter().position(|x| x == row).ok_or(UnknownLabel { axis: "row", label: row.into() })?;
        let c = self
            .columns
            .iter()
            .position(|x| x == column)
            .ok_or(UnknownLabel { axis: "column", label: column.into() })?;
        Ok((r, c))
    }

    pub fn set(&mut self, row: &str, column: &str, value: Option<f64>) -> Result<(), UnknownLabel> {
        let (r, c) = self.position(row, column)?;
        self.values[r][c] = value;
        Ok(())
    }

    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        self.position(row, column).ok().and_then(|(r, c)| self.values[r][c])
    }

    pub fn filled(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// Rows that have at least one value.
    pub fn populated_rows(&self) -> Vec<&str> {
        self.rows
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.iter().any(Option::is_some))
            .map(|(r, _)| r.as_str())
            .collect()
    }

    /// Header `setting<TAB>col…`, then one line per row with three-decimal
    /// values or `NA`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("setting");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (row, values) in self.rows.iter().zip(&self.values) {
            out.push_str(row);
            for v in values {
                out.push('\t');
                match v {
                    Some(x) => out.push_str(&format!("{x:.3}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trust_row_labels() {
        assert_eq!(
            trust_rows(),
            [
                "Directly", "h+v(total)", "h(total)", "v(total)", "h+v(half)", "h(half)", "v(half)", "h+v(none)",
                "h(none)", "v(none)"
            ]
        );
    }

    #[test]
    fn difficulty_row_labels() {
        assert_eq!(
            difficulty_rows(),
            ["Directly(total)", "h+v(total)", "h(total)", "v(total)", "h+v(none)", "h(none)", "v(none)"]
        );
    }

    #[test]
    fn tsv_rendering() {
        let cols = DEFAULT_COLUMNS.iter().map(|s| s.to_string()).collect();
        let mut g = ExperimentGrid::new(vec!["Directly".into(), "h(total)".into()], cols);
        g.set("Directly", "o1", Some(0.5)).unwrap();
        assert!(g.set("x", "o1", None).is_err());
        assert_eq!(g.to_tsv(), "setting\t4o\to1\tr1\nDirectly\tNA\t0.500\tNA\nh(total)\tNA\tNA\tNA\n");
        assert_eq!(g.populated_rows(), ["Directly"]);
        let back: ExperimentGrid = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back.to_tsv(), g.to_tsv());
    }
}

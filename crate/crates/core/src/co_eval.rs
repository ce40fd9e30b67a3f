//! Expert–model co-scoring.
//!
//! Each pattern gets five recommended papers. Every paper earns citation
//! points from its recommendation rank (1st → 5 … 5th → 1) and ranking
//! points from its JCR quartile (Q1 → 4 … Q4 → 1); the sum is signed by the
//! paper's stance. A pattern is literature-valid when the five signed scores
//! add up to a positive total. Agreement between the literature verdicts and
//! expert verdicts is measured with Cohen's kappa.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::grid::{row_label, trust_rows, ExperimentGrid};
use crate::segmentation::{PromptLevel, Stage};
use crate::pattern_miner::PatternSet;

/// Kappa above which two raters count as consistent.
pub const CONSISTENCY_THRESHOLD: f64 = 0.6;

/// Papers scored per pattern.
pub const EVIDENCE_PER_PATTERN: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoEvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degenerate marginals: {0}")]
    DegenerateMarginals(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quartile {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quartile {
    pub const ALL: [Quartile; 4] = [Quartile::Q1, Quartile::Q2, Quartile::Q3, Quartile::Q4];

    pub fn ranking_points(self) -> i32 {
        match self {
            Quartile::Q1 => 4,
            Quartile::Q2 => 3,
            Quartile::Q3 => 2,
            Quartile::Q4 => 1,
        }
    }
}

impl FromStr for Quartile {
    type Err = CoEvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Q1" => Ok(Quartile::Q1),
            "Q2" => Ok(Quartile::Q2),
            "Q3" => Ok(Quartile::Q3),
            "Q4" => Ok(Quartile::Q4),
            other => Err(CoEvalError::Domain(format!("unknown quartile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Oppose,
    Neutral,
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::Support, Stance::Oppose, Stance::Neutral];

    pub fn sign(self) -> i32 {
        match self {
            Stance::Support => 1,
            Stance::Oppose => -1,
            Stance::Neutral => 0,
        }
    }
}

impl FromStr for Stance {
    type Err = CoEvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "support" | "supports" | "+1" | "1" => Ok(Stance::Support),
            "oppose" | "opposes" | "-1" => Ok(Stance::Oppose),
            "neutral" | "0" => Ok(Stance::Neutral),
            other => Err(CoEvalError::Domain(format!("unknown stance {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureEvidence {
    pub pattern_id: String,
    /// Recommendation order, 1 to 5.
    pub rank: u8,
    pub quartile: Quartile,
    pub stance: Stance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl LiteratureEvidence {
    pub fn new(pattern_id: &str, rank: u8, quartile: Quartile, stance: Stance) -> Self {
        LiteratureEvidence { pattern_id: pattern_id.into(), rank, quartile, stance, title: None }
    }

    /// 6 − rank.
    pub fn citation_points(&self) -> Result<i32, CoEvalError> {
        if !(1..=5).contains(&self.rank) {
            return Err(CoEvalError::Domain(format!("rank {} outside 1..=5", self.rank)));
        }
        Ok(6 - self.rank as i32)
    }

    pub fn ranking_points(&self) -> i32 {
        self.quartile.ranking_points()
    }
}

/// Multipliers on citation and ranking points. Both 1 by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub citation: i32,
    pub ranking: i32,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { citation: 1, ranking: 1 }
    }
}

/// (C + R) · S for one paper.
pub fn score_evidence(e: &LiteratureEvidence) -> Result<i32, CoEvalError> {
    score_evidence_weighted(e, ScoreWeights::default())
}

pub fn score_evidence_weighted(e: &LiteratureEvidence, w: ScoreWeights) -> Result<i32, CoEvalError> {
    Ok((w.citation * e.citation_points()? + w.ranking * e.ranking_points()) * e.stance.sign())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
}

impl Verdict {
    /// Valid only for a strictly positive total.
    pub fn from_total(total: i32) -> Verdict {
        if total > 0 {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
        })
    }
}

impl FromStr for Verdict {
    type Err = CoEvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valid" | "v" => Ok(Verdict::Valid),
            "invalid" | "i" => Ok(Verdict::Invalid),
            other => Err(CoEvalError::Domain(format!("unknown verdict {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternScore {
    pub pattern_id: String,
    /// Signed score of each paper, in rank order.
    pub scores: Vec<i32>,
    pub total: i32,
    pub literature_verdict: Verdict,
    /// Total of exactly zero, recorded as invalid.
    pub tied: bool,
}

/// Scores the five papers of one pattern.
pub fn score_pattern(evidence: &[LiteratureEvidence]) -> Result<PatternScore, CoEvalError> {
    score_pattern_weighted(evidence, ScoreWeights::default())
}

pub fn score_pattern_weighted(evidence: &[LiteratureEvidence], w: ScoreWeights) -> Result<PatternScore, CoEvalError> {
    if evidence.len() != EVIDENCE_PER_PATTERN {
        return Err(CoEvalError::Validation(format!(
            "expected {EVIDENCE_PER_PATTERN} evidence records, got {}",
            evidence.len()
        )));
    }
    let pattern_id = &evidence[0].pattern_id;
    if let Some(e) = evidence.iter().find(|e| &e.pattern_id != pattern_id) {
        return Err(CoEvalError::Validation(format!(
            "evidence mixes patterns {pattern_id} and {}",
            e.pattern_id
        )));
    }
    let ranks: BTreeSet<u8> = evidence.iter().map(|e| e.rank).collect();
    if ranks != (1..=5).collect() {
        return Err(CoEvalError::Validation(format!("ranks of {pattern_id} are not a permutation of 1..=5")));
    }
    let mut ordered: Vec<&LiteratureEvidence> = evidence.iter().collect();
    ordered.sort_by_key(|e| e.rank);
    let scores = ordered.iter().map(|e| score_evidence_weighted(e, w)).collect::<Result<Vec<_>, _>>()?;
    let total = scores.iter().sum();
    Ok(PatternScore {
        pattern_id: pattern_id.clone(),
        scores,
        total,
        literature_verdict: Verdict::from_total(total),
        tied: total == 0,
    })
}

/// Groups evidence by pattern and scores every group.
pub fn score_all(evidence: &[LiteratureEvidence]) -> Result<Vec<PatternScore>, CoEvalError> {
    let mut groups: BTreeMap<&str, Vec<LiteratureEvidence>> = BTreeMap::new();
    for e in evidence {
        groups.entry(&e.pattern_id).or_default().push(e.clone());
    }
    groups.values().map(|g| score_pattern(g)).collect()
}

static EVIDENCE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[-*]\s*)?([1-5])\s*[.)]?\s*\|\s*(Q[1-4])\s*\|\s*(support|supports|oppose|opposes|neutral)\s*\|\s*(.*?)\s*$")
        .expect("valid regex")
});

/// Evidence records from lines of the form `rank | Qn | stance | title`.
/// Lines that do not match are skipped.
pub fn parse_evidence_lines(pattern_id: &str, text: &str) -> Vec<LiteratureEvidence> {
    text.lines()
        .filter_map(|line| {
            let c = EVIDENCE_LINE.captures(line)?;
            Some(LiteratureEvidence {
                pattern_id: pattern_id.into(),
                rank: c[1].parse().ok()?,
                quartile: c[2].parse().ok()?,
                stance: c[3].parse().ok()?,
                title: Some(c[4].to_string()).filter(|t| !t.is_empty()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rater {
    Expert,
    Literature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub pattern_id: String,
    pub rater: Rater,
    pub verdict: Verdict,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Inserted,
    /// Same verdict and note as the current one; nothing recorded.
    Unchanged,
    Replaced { previous: ReviewVerdict },
}

/// Append-only verdict history. The latest entry per (pattern, rater) is the
/// current verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictLog {
    pub entries: Vec<ReviewVerdict>,
}

impl VerdictLog {
    pub fn new(entries: Vec<ReviewVerdict>) -> Self {
        VerdictLog { entries }
    }

    pub fn current_for(&self, pattern_id: &str, rater: Rater) -> Option<&ReviewVerdict> {
        self.entries.iter().rev().find(|v| v.pattern_id == pattern_id && v.rater == rater)
    }

    pub fn submit(&mut self, v: ReviewVerdict) -> SubmitOutcome {
        match self.current_for(&v.pattern_id, v.rater) {
            Some(cur) if cur.verdict == v.verdict && cur.note == v.note => SubmitOutcome::Unchanged,
            Some(cur) => {
                let previous = cur.clone();
                self.entries.push(v);
                SubmitOutcome::Replaced { previous }
            }
            None => {
                self.entries.push(v);
                SubmitOutcome::Inserted
            }
        }
    }

    /// Current verdict per pattern for one rater.
    pub fn current(&self, rater: Rater) -> BTreeMap<String, Verdict> {
        let mut out = BTreeMap::new();
        for v in self.entries.iter().filter(|v| v.rater == rater) {
            out.insert(v.pattern_id.clone(), v.verdict);
        }
        out
    }

    /// Every entry for one pattern, oldest first.
    pub fn history(&self, pattern_id: &str) -> Vec<&ReviewVerdict> {
        self.entries.iter().filter(|v| v.pattern_id == pattern_id).collect()
    }
}

/// 2×2 agreement counts; index 0 is valid, 1 is invalid; rows are rater A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Contingency(pub [[usize; 2]; 2]);

impl Contingency {
    pub fn from_pairs(a: &[Verdict], b: &[Verdict]) -> Contingency {
        let idx = |v: Verdict| if v == Verdict::Valid { 0 } else { 1 };
        let mut t = [[0; 2]; 2];
        for (x, y) in a.iter().zip(b) {
            t[idx(*x)][idx(*y)] += 1;
        }
        Contingency(t)
    }

    pub fn n(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn agreements(&self) -> usize {
        self.0[0][0] + self.0[1][1]
    }

    pub fn row_totals(&self) -> [usize; 2] {
        [self.0[0][0] + self.0[0][1], self.0[1][0] + self.0[1][1]]
    }

    pub fn column_totals(&self) -> [usize; 2] {
        [self.0[0][0] + self.0[1][0], self.0[0][1] + self.0[1][1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub n: usize,
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
    pub consistent: bool,
    pub contingency: Contingency,
}

/// Cohen's kappa of two verdict vectors over the same items.
///
/// Computed from integer counts as (n·agree − Σ marginal products) /
/// (n² − Σ marginal products), which equals (p_o − p_e)/(1 − p_e) and keeps
/// the consistency threshold comparison exact.
pub fn cohen_kappa(a: &[Verdict], b: &[Verdict]) -> Result<KappaReport, CoEvalError> {
    if a.len() != b.len() {
        return Err(CoEvalError::Validation(format!("verdict vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(CoEvalError::Validation("no items to compare".into()));
    }
    let table = Contingency::from_pairs(a, b);
    let n = table.n() as i64;
    let agree = table.agreements() as i64;
    let (rows, cols) = (table.row_totals(), table.column_totals());
    let chance = (rows[0] * cols[0] + rows[1] * cols[1]) as i64;
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / (n * n) as f64;

    let unanimous = |t: [usize; 2]| t[0] == 0 || t[1] == 0;
    if unanimous(rows) && unanimous(cols) && chance == 0 {
        return Err(CoEvalError::DegenerateMarginals(
            "each rater gave a single, different verdict to every item".into(),
        ));
    }
    let (numerator, denominator) = (n * agree - chance, n * n - chance);
    let (kappa, consistent) = if denominator == 0 {
        if agree != n {
            return Err(CoEvalError::DegenerateMarginals("chance agreement is 1 but observed agreement is not".into()));
        }
        (1.0, true)
    } else {
        // κ > 3/5  ⇔  5·num > 3·den  (den > 0)
        (numerator as f64 / denominator as f64, 5 * numerator > 3 * denominator)
    };
    Ok(KappaReport { n: table.n(), p_o, p_e, kappa, consistent, contingency: table })
}

/// Kappa over the items both raters judged, in `items` order. `None` when no
/// item has both verdicts or the marginals are degenerate.
pub fn kappa_for_items(
    items: &[&str],
    a: &BTreeMap<String, Verdict>,
    b: &BTreeMap<String, Verdict>,
) -> Option<KappaReport> {
    let (va, vb): (Vec<Verdict>, Vec<Verdict>) =
        items.iter().filter_map(|id| Some((*a.get(*id)?, *b.get(*id)?))).unzip();
    cohen_kappa(&va, &vb).ok()
}

/// One kappa result placed in the consistency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKappa {
    pub stage: Stage,
    pub prompt_level: PromptLevel,
    /// Column label, e.g. `4o`.
    pub column: String,
    pub report: Option<KappaReport>,
}

impl CellKappa {
    pub fn row(&self) -> String {
        match self.stage {
            Stage::Direct => "Directly".into(),
            s => row_label(s, self.prompt_level),
        }
    }
}

/// Kappa per pattern set, over the set's patterns that both raters judged.
/// `column` maps a model id to its grid column.
pub fn trust_cells(
    sets: &[&PatternSet],
    expert: &BTreeMap<String, Verdict>,
    literature: &BTreeMap<String, Verdict>,
    column: impl Fn(&str) -> String,
) -> Vec<CellKappa> {
    sets.iter()
        .map(|set| {
            let mut seen = BTreeSet::new();
            let items: Vec<&str> =
                set.patterns.iter().map(|p| p.id.as_str()).filter(|id| seen.insert(*id)).collect();
            CellKappa {
                stage: set.key.stage,
                prompt_level: set.key.prompt_level,
                column: column(&set.key.model),
                report: kappa_for_items(&items, expert, literature),
            }
        })
        .collect()
}

/// Consistency grid with the fixed row set; cells without a result are NA.
pub fn trust_grid(cells: &[CellKappa], columns: &[String]) -> ExperimentGrid {
    let mut grid = ExperimentGrid::new(trust_rows(), columns.to_vec());
    for c in cells {
        let _ = grid.set(&c.row(), &c.column, c.report.as_ref().map(|r| r.kappa));
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Verdict::{Invalid as I, Valid as V};

    fn ev(rank: u8, q: Quartile, s: Stance) -> LiteratureEvidence {
        LiteratureEvidence::new("p", rank, q, s)
    }

    #[test]
    fn single_paper_scores() {
        assert_eq!(score_evidence(&ev(1, Quartile::Q1, Stance::Support)).unwrap(), 9);
        assert_eq!(score_evidence(&ev(5, Quartile::Q4, Stance::Oppose)).unwrap(), -2);
        assert_eq!(score_evidence(&ev(3, Quartile::Q2, Stance::Neutral)).unwrap(), 0);
        assert!(matches!(score_evidence(&ev(6, Quartile::Q1, Stance::Support)), Err(CoEvalError::Domain(_))));
        assert!(matches!(score_evidence(&ev(0, Quartile::Q1, Stance::Support)), Err(CoEvalError::Domain(_))));
    }

    #[test]
    fn five_paper_example() {
        use Quartile::*;
        use Stance::*;
        let e = [ev(1, Q1, Support), ev(2, Q1, Support), ev(3, Q2, Neutral), ev(4, Q3, Oppose), ev(5, Q4, Support)];
        let s = score_pattern(&e).unwrap();
        assert_eq!(s.scores, [9, 8, 0, -4, 2]);
        assert_eq!(s.total, 15);
        assert_eq!(s.literature_verdict, Verdict::Valid);
        assert!(!s.tied);
    }

    #[test]
    fn all_neutral_is_an_invalid_tie() {
        let e: Vec<_> = (1..=5).map(|r| ev(r, Quartile::Q1, Stance::Neutral)).collect();
        let s = score_pattern(&e).unwrap();
        assert_eq!((s.total, s.literature_verdict, s.tied), (0, Verdict::Invalid, true));
    }

    #[test]
    fn pattern_validation() {
        let four: Vec<_> = (1..=4).map(|r| ev(r, Quartile::Q1, Stance::Support)).collect();
        assert!(matches!(score_pattern(&four), Err(CoEvalError::Validation(_))));
        let dup: Vec<_> = [1, 2, 3, 4, 4].iter().map(|&r| ev(r, Quartile::Q1, Stance::Support)).collect();
        assert!(matches!(score_pattern(&dup), Err(CoEvalError::Validation(_))));
    }

    #[test]
    fn weights_scale_components() {
        let w = ScoreWeights { citation: 2, ranking: 1 };
        assert_eq!(score_evidence_weighted(&ev(1, Quartile::Q1, Stance::Support), w).unwrap(), 14);
    }

    #[test]
    fn kappa_examples() {
        let r = cohen_kappa(&[V, V, V, I], &[V, V, I, I]).unwrap();
        assert_eq!((r.p_o, r.p_e, r.kappa, r.consistent), (0.75, 0.5, 0.5, false));
        assert_eq!(r.contingency.0, [[2, 1], [0, 1]]);

        let r = cohen_kappa(&[V, I, V, I], &[V, I, V, I]).unwrap();
        assert_eq!((r.p_o, r.kappa, r.consistent), (1.0, 1.0, true));

        // p_o = p_e = 0.5
        let r = cohen_kappa(&[V, V, I, I], &[V, I, V, I]).unwrap();
        assert_eq!(r.kappa, 0.0);
    }

    #[test]
    fn kappa_degenerate_cases() {
        let r = cohen_kappa(&[V, V, V], &[V, V, V]).unwrap();
        assert_eq!((r.p_e, r.kappa, r.consistent), (1.0, 1.0, true));
        assert!(matches!(cohen_kappa(&[V, V], &[I, I]), Err(CoEvalError::DegenerateMarginals(_))));
        assert!(matches!(cohen_kappa(&[V], &[V, I]), Err(CoEvalError::Validation(_))));
        assert!(matches!(cohen_kappa(&[], &[]), Err(CoEvalError::Validation(_))));
    }

    #[test]
    fn threshold_is_strict() {
        // contingency [[4,1],[1,4]]: p_o = 0.8, p_e = 0.5, κ = 0.6 exactly
        let a = [V, V, V, V, V, I, I, I, I, I];
        let b = [V, V, V, V, I, V, I, I, I, I];
        let r = cohen_kappa(&a, &b).unwrap();
        assert_eq!((r.p_o, r.p_e, r.kappa), (0.8, 0.5, 0.6));
        assert!(!r.consistent);

        let b = [V, V, V, V, V, V, I, I, I, I];
        let r = cohen_kappa(&a, &b).unwrap();
        assert!(r.kappa > 0.6 && r.consistent);
    }

    #[test]
    fn verdict_history() {
        let mk = |v, note: Option<&str>| ReviewVerdict {
            pattern_id: "p".into(),
            rater: Rater::Expert,
            verdict: v,
            timestamp: 1,
            note: note.map(Into::into),
        };
        let mut log = VerdictLog::default();
        assert_eq!(log.submit(mk(V, None)), SubmitOutcome::Inserted);
        assert_eq!(log.submit(mk(V, None)), SubmitOutcome::Unchanged);
        assert!(matches!(log.submit(mk(I, Some("recheck"))), SubmitOutcome::Replaced { .. }));
        assert_eq!(log.entries.len(), 2);
        assert_eq!(log.current(Rater::Expert)["p"], I);
        assert_eq!(log.history("p").len(), 2);
    }

    #[test]
    fn evidence_line_parsing() {
        let text = "Here you go:\n1 | Q1 | support | Eye movements in code reading\n2. | q3 | Oppose | X\nnot a line\n5 | Q4 | neutral |";
        let e = parse_evidence_lines("p", text);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].title.as_deref(), Some("Eye movements in code reading"));
        assert_eq!((e[1].rank, e[1].quartile, e[1].stance), (2, Quartile::Q3, Stance::Oppose));
        assert_eq!(e[2].title, None);
    }

    #[test]
    fn grid_from_cells() {
        let report = cohen_kappa(&[V, I], &[V, I]).unwrap();
        let cells = [
            CellKappa { stage: Stage::Direct, prompt_level: PromptLevel::Detailed, column: "4o".into(), report: Some(report.clone()) },
            CellKappa { stage: Stage::Combined, prompt_level: PromptLevel::SemiDetailed, column: "r1".into(), report: None },
        ];
        let cols: Vec<String> = crate::grid::DEFAULT_COLUMNS.iter().map(|s| s.to_string()).collect();
        let g = trust_grid(&cells, &cols);
        assert_eq!(g.rows.len(), 10);
        assert_eq!(g.get("Directly", "4o"), Some(1.0));
        assert_eq!(g.populated_rows(), ["Directly"]);
    }

    /// Textbook kappa from the four cell proportions.
    fn oracle(a: &[bool], b: &[bool]) -> f64 {
        let n = a.len() as f64;
        let mut t = [[0.0f64; 2]; 2];
        for (x, y) in a.iter().zip(b) {
            t[usize::from(!x)][usize::from(!y)] += 1.0 / n;
        }
        let po = t[0][0] + t[1][1];
        let pe = (t[0][0] + t[0][1]) * (t[0][0] + t[1][0]) + (t[1][0] + t[1][1]) * (t[0][1] + t[1][1]);
        (po - pe) / (1.0 - pe)
    }

    fn to_verdicts(v: &[bool]) -> Vec<Verdict> {
        v.iter().map(|&x| if x { V } else { I }).collect()
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (1usize..40).prop_flat_map(|n| (proptest::collection::vec(any::<bool>(), n), proptest::collection::vec(any::<bool>(), n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn kappa_bounded_symmetric_and_matches_oracle((a, b) in arb_pair()) {
            let (va, vb) = (to_verdicts(&a), to_verdicts(&b));
            match cohen_kappa(&va, &vb) {
                Ok(r) => {
                    prop_assert!((-1.0..=1.0).contains(&r.kappa));
                    let s = cohen_kappa(&vb, &va).unwrap();
                    prop_assert_eq!(r.kappa, s.kappa);
                    prop_assert_eq!(r.consistent, r.kappa > 0.6);
                    let unanimous_same = a.iter().all(|x| *x == a[0]) && b.iter().all(|x| *x == a[0]);
                    if !unanimous_same {
                        prop_assert!((r.kappa - oracle(&a, &b)).abs() < 1e-12);
                    }
                }
                Err(CoEvalError::DegenerateMarginals(_)) => {
                    prop_assert!(a.iter().all(|x| *x == a[0]) && b.iter().all(|x| *x == b[0]) && a[0] != b[0]);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }

    proptest! {
        #[test]
        fn self_agreement_is_one(a in proptest::collection::vec(any::<bool>(), 1..40)) {
            let v = to_verdicts(&a);
            prop_assert_eq!(cohen_kappa(&v, &v).unwrap().kappa, 1.0);
        }

        #[test]
        fn evidence_bounds(rank in 1u8..=5, q in 0usize..4, s in 0usize..3) {
            let e = ev(rank, Quartile::ALL[q], Stance::ALL[s]);
            let f = score_evidence(&e).unwrap();
            prop_assert!((-9..=9).contains(&f));
            if e.stance != Stance::Neutral {
                prop_assert_eq!(f.abs(), e.citation_points().unwrap() + e.ranking_points());
            }
        }

        #[test]
        fn pattern_total_matches_oracle(
            perm in Just((1u8..=5).collect::<Vec<_>>()).prop_shuffle(),
            qs in proptest::collection::vec(0usize..4, 5),
            ss in proptest::collection::vec(0usize..3, 5),
            scale in 1i32..5,
        ) {
            let e: Vec<_> = (0..5).map(|i| ev(perm[i], Quartile::ALL[qs[i]], Stance::ALL[ss[i]])).collect();
            let got = score_pattern(&e).unwrap();
            let mut expected = 0;
            for x in &e {
                let c = 6 - x.rank as i32;
                let r = 4 - qs[e.iter().position(|y| y == x).unwrap()] as i32;
                let s = match x.stance { Stance::Support => 1, Stance::Oppose => -1, Stance::Neutral => 0 };
                expected += (c + r) * s;
            }
            prop_assert_eq!(got.total, expected);
            prop_assert!((-45..=45).contains(&got.total));
            let scaled = Verdict::from_total(got.scores.iter().map(|f| f * scale).sum());
            prop_assert_eq!(scaled, got.literature_verdict);
        }
    }
}

use std::sync::LazyLock;

use regex::Regex;

use super::ModelResponse;
use crate::pattern_miner::BehavioralPattern;
use crate::segmentation::{PromptLevel, Stage};

static LIST_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\(?\d{1,3}[.):]|[-*•+])\s+(.*\S)\s*$").expect("valid regex")
});

/// Statements of numbered (`1.`, `2)`, `(3)`) or bulleted (`-`, `*`, `•`)
/// lines, marker and surrounding whitespace removed. Each returned slice
/// borrows from `text`.
pub fn parse_numbered_lines(text: &str) -> Vec<&str> {
    text.lines()
        .filter_map(|line| LIST_ITEM.captures(line).and_then(|c| c.get(1)).map(|m| m.as_str()))
        .map(|s| s.trim_start_matches("**").trim_end_matches("**").trim())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Items of a JSON array of strings found in `text`, kept only when the
/// string occurs verbatim in the response.
fn parse_json_list(text: &str) -> Vec<&str> {
    let (Some(start), Some(end)) = (text.find('['), text.rfind(']')) else {
        return Vec::new();
    };
    if end <= start {
        return Vec::new();
    }
    let Ok(items) = serde_json::from_str::<Vec<String>>(&text[start..=end]) else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| {
            let item = item.trim();
            text.find(item).filter(|_| !item.is_empty()).map(|at| &text[at..at + item.len()])
        })
        .collect()
}

/// Pattern statements of one response, tagged with the response's model
/// and run. Every pattern text is a substring of `resp.text`.
pub fn parse_patterns(resp: &ModelResponse, stage: Stage, level: PromptLevel) -> Vec<BehavioralPattern> {
    let mut items = parse_numbered_lines(&resp.text);
    if items.is_empty() {
        items = parse_json_list(&resp.text);
    }
    if items.is_empty() && !resp.text.trim().is_empty() {
        log::warn!(
            "no pattern statements in response {} (model {}, run {})",
            resp.digest,
            resp.model_id,
            resp.run_index
        );
    }
    items
        .into_iter()
        .map(|t| BehavioralPattern::new(t, stage, level, &resp.model_id, resp.run_index))
        .collect()
}

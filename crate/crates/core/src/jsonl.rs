//! One JSON document per line, with errors that point at the bad line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line} (byte {offset}): {message}", path.display())]
    Parse { path: PathBuf, line: usize, offset: usize, message: String },
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        let _ = writeln!(out, "{}", serde_json::to_string(item).expect("record serializes"));
    }
    out
}

/// Parses `text`; `path` only labels errors. Blank lines are skipped.
pub fn from_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() {
            let item = serde_json::from_str(body).map_err(|e| JsonlError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                offset: offset + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            out.push(item);
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let text = std::fs::read_to_string(path).map_err(|source| JsonlError::Io { path: path.into(), source })?;
    from_jsonl(&text, path)
}

/// Writes the whole file, creating parent directories.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    let io = |source| JsonlError::Io { path: path.into(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, to_jsonl(items)).map_err(io)
}

/// Appends one record.
pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), JsonlError> {
    use std::io::Write;
    let io = |source| JsonlError::Io { path: path.into(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    writeln!(f, "{}", serde_json::to_string(item).expect("record serializes")).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_error_position() {
        let items = vec![serde_json::json!({"a": 1}), serde_json::json!({"b": [1.5]})];
        let text = to_jsonl(&items);
        let back: Vec<serde_json::Value> = from_jsonl(&text, Path::new("x.jsonl")).unwrap();
        assert_eq!(back, items);

        let bad = "{\"a\":1}\n{\"a\":}\n";
        match from_jsonl::<serde_json::Value>(bad, Path::new("x.jsonl")) {
            Err(JsonlError::Parse { line, offset, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(offset, 8 + 5);
            }
            other => panic!("{other:?}"),
        }
        let msg = from_jsonl::<serde_json::Value>(bad, Path::new("x.jsonl")).unwrap_err().to_string();
        assert!(msg.starts_with("x.jsonl:2 (byte 13)"), "{msg}");
    }
}

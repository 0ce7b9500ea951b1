//! JSONL annotation records: `{"code", "comment", "type", "raters"}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RatingMatrix;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// One annotated example. `raters` holds each rater's label by position,
/// with `null` where a rater did not label the example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub code: String,
    pub comment: String,
    #[serde(rename = "type")]
    pub comment_type: String,
    #[serde(default)]
    pub raters: Vec<Option<String>>,
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Format {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

impl RatingMatrix {
    pub fn from_records(records: &[DatasetRecord]) -> RatingMatrix {
        RatingMatrix::new(records.iter().map(|r| r.raters.clone()).collect())
    }
}

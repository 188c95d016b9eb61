//! Plain numeric CSV ingestion for feature matrices.
//!
//! Lines starting with `#` are comments (the CLI embeds its config echo
//! that way), an optional header is detected by a non-numeric first row,
//! and every error carries the 1-based line number of the offending line.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;

/// Parses CSV text into a row-per-sample matrix.
pub fn parse_csv_features(text: &str) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols: Option<usize> = None;
    let mut saw_data_candidate = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "non-finite value".into(),
                    });
                }
                match cols {
                    None => cols = Some(values.len()),
                    Some(c) if c != values.len() => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("expected {c} columns, found {}", values.len()),
                        });
                    }
                    _ => {}
                }
                rows.push(values);
                saw_data_candidate = true;
            }
            Err(_) => {
                if !saw_data_candidate && rows.is_empty() {
                    // first content line is non-numeric: treat as header
                    saw_data_candidate = true;
                    continue;
                }
                let bad = cells
                    .iter()
                    .find(|c| c.parse::<f64>().is_err())
                    .copied()
                    .unwrap_or("");
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-numeric cell '{bad}'"),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    FeatureMatrix::from_rows(&rows)
}

/// Loads a feature CSV from disk.
pub fn load_csv_features(path: &Path) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_features(&text)
}

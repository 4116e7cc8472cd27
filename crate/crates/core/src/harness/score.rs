//! Score an estimate against a dataset's ground truth.

use std::path::Path;

use serde_json::Value;

use super::{format_significant, HarnessError};
use crate::error::EmestError;
use crate::io;
use crate::recursive::l2_distance;

/// Parse an estimate: a JSON array, a JSON object with an `estimate` array
/// (such as an estimation report), or floats separated by commas or whitespace.
pub fn parse_estimate(text: &str) -> Result<Vec<f64>, HarnessError> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let v: Value =
            serde_json::from_str(trimmed).map_err(|e| HarnessError::config(format!("estimate: invalid JSON: {e}")))?;
        let arr = match &v {
            Value::Array(a) => a,
            Value::Object(o) => o
                .get("estimate")
                .and_then(Value::as_array)
                .ok_or_else(|| HarnessError::config("estimate: object has no `estimate` array"))?,
            _ => unreachable!(),
        };
        return arr
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_f64()
                    .ok_or_else(|| HarnessError::config(format!("estimate[{i}]: not a number")))
            })
            .collect();
    }
    trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .map_err(|e| HarnessError::config(format!("estimate[{i}]: `{s}`: {e}")))
        })
        .collect()
}

pub fn score_values(estimate: &[f64], mean: &[f64]) -> Result<f64, HarnessError> {
    if estimate.len() != mean.len() {
        return Err(EmestError::DimensionMismatch {
            expected: mean.len(),
            got: estimate.len(),
        }
        .into());
    }
    Ok(l2_distance(estimate, mean))
}

/// `|estimate - mu|_2` formatted with 12 significant digits.
pub fn score(estimate_path: &Path, dataset_path: &Path) -> Result<String, HarnessError> {
    let text = std::fs::read_to_string(estimate_path)
        .map_err(|e| HarnessError::io(format!("{}: {e}", estimate_path.display())))?;
    let estimate = parse_estimate(&text)?;
    let data = io::read_dataset(dataset_path)?;
    let truth = data.truth().ok_or(EmestError::MissingTruth)?;
    let err = score_values(&estimate, truth.mean.as_slice())?;
    Ok(format_significant(err, 12))
}

//! Pairs CSV: header row with `id`, `prediction`, `actual`, plus any
//! number of extra columns that `--group-by` can refer to.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use countrate::dist::MAX_RATE;
use countrate::PredictionPair;

use crate::error::CliError;

pub const REQUIRED: [&str; 3] = ["id", "prediction", "actual"];
const MAX_REPORTED: usize = 20;

fn parse_actual(raw: &str) -> Result<u64, String> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    match raw.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as u64),
        Ok(v) => Err(format!("actual must be a non-negative integer count, got {v}")),
        Err(_) => Err(format!("actual is not a number: {raw:?}")),
    }
}

fn parse_prediction(raw: &str) -> Result<f64, String> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && (0.0..=MAX_RATE).contains(&v) => Ok(v),
        Ok(v) => Err(format!("prediction must lie in [0, 1e5], got {v}")),
        Err(_) => Err(format!("prediction is not a number: {raw:?}")),
    }
}

pub fn read_pairs_from(
    source: impl Read,
    name: &str,
    group_by: &[String],
) -> Result<Vec<PredictionPair>, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| CliError::schema(format!("{name}: line 1: {e}")))?
        .clone();
    let position = |col: &str| headers.iter().position(|h| h == col);
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .chain(group_by.iter().map(String::as_str))
        .filter(|c| position(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::schema(format!(
            "{name}: line 1: missing columns {}",
            missing.join(", ")
        )));
    }
    let (id, pred, act) = (
        position("id").unwrap(),
        position("prediction").unwrap(),
        position("actual").unwrap(),
    );
    let group_cols: Vec<(String, usize)> = group_by
        .iter()
        .map(|g| (g.clone(), position(g).unwrap()))
        .collect();

    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    let mut n_errors = 0;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                n_errors += 1;
                if errors.len() < MAX_REPORTED {
                    errors.push(format!("line {line}: {e}"));
                }
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match (parse_prediction(&record[pred]), parse_actual(&record[act])) {
            (Ok(prediction), Ok(actual)) => {
                let groups: BTreeMap<String, String> = group_cols
                    .iter()
                    .map(|(g, i)| (g.clone(), record[*i].to_string()))
                    .collect();
                pairs.push(PredictionPair {
                    id: record[id].to_string(),
                    prediction,
                    actual,
                    groups,
                });
            }
            (p, a) => {
                for msg in [p.err(), a.err()].into_iter().flatten() {
                    n_errors += 1;
                    if errors.len() < MAX_REPORTED {
                        errors.push(format!("line {line}: {msg}"));
                    }
                }
            }
        }
    }
    if !errors.is_empty() {
        let more = n_errors - errors.len();
        let mut message = format!("{name}: {n_errors} invalid rows\n  {}", errors.join("\n  "));
        if more > 0 {
            message.push_str(&format!("\n  ... and {more} more"));
        }
        return Err(CliError::schema(message));
    }
    if pairs.is_empty() {
        return Err(CliError::schema("no pairs"));
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path, group_by: &[String]) -> Result<Vec<PredictionPair>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
    read_pairs_from(file, &path.display().to_string(), group_by)
}

/// Splits pairs by their group labels, ordered by label.
pub fn split_groups(pairs: Vec<PredictionPair>) -> BTreeMap<BTreeMap<String, String>, Vec<PredictionPair>> {
    let mut groups: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for pair in pairs {
        groups.entry(pair.groups.clone()).or_default().push(pair);
    }
    groups
}

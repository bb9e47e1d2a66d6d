//! CSV input: label in the first column, numeric features after it.

use std::path::Path;

use rcm_core::{Dataset, Label, Vector};

use crate::CliError;

/// Parsed rows before class checks. `labels` is `None` for unlabeled files.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub points: Vec<Vector>,
    pub labels: Option<Vec<Label>>,
}

fn parse_label(token: &str) -> Option<Label> {
    match token.trim() {
        "+1" | "1" => Some(Label::Positive),
        "-1" => Some(Label::Negative),
        _ => None,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Splits non-blank lines into fields, skipping a header row whose first
/// token is not numeric. Returns `(line number, fields)` pairs.
fn rows(text: &str) -> Vec<(usize, Vec<&str>)> {
    let mut out: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    if let Some((_, first)) = out.first() {
        if first[0].parse::<f64>().is_err() {
            out.remove(0);
        }
    }
    out
}

fn parse_features(line: usize, fields: &[&str]) -> Result<Vector, CliError> {
    let values = fields
        .iter()
        .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or(CliError::Format { line })?;
    Ok(Vector::from_vec(values))
}

/// Reads a labeled training file.
pub fn ingest_csv(path: &Path) -> Result<Dataset, CliError> {
    let data = parse_labeled(&read(path)?)?;
    data.check_trainable()?;
    Ok(data)
}

pub fn parse_labeled(text: &str) -> Result<Dataset, CliError> {
    let mut width = None;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, fields) in rows(text) {
        if *width.get_or_insert(fields.len()) != fields.len() || fields.len() < 2 {
            return Err(CliError::Format { line });
        }
        let label = parse_label(fields[0]).ok_or(CliError::Label { line })?;
        points.push(parse_features(line, &fields[1..])?);
        labels.push(label);
    }
    Ok(Dataset::new(points, labels)?)
}

/// Reads a prediction input: `dim + 1` columns are a labeled file, `dim`
/// columns are features only.
pub fn read_table(path: &Path, dim: usize) -> Result<Table, CliError> {
    parse_table(&read(path)?, dim)
}

pub fn parse_table(text: &str, dim: usize) -> Result<Table, CliError> {
    let rows = rows(text);
    let labeled = match rows.first() {
        None => false,
        Some((_, f)) if f.len() == dim + 1 => true,
        Some((_, f)) if f.len() == dim => false,
        Some((_, f)) => {
            return Err(CliError::Core(rcm_core::RcmError::DimensionMismatch {
                expected: dim,
                found: f.len(),
            }))
        }
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, fields) in rows {
        if fields.len() != dim + usize::from(labeled) {
            return Err(CliError::Format { line });
        }
        let features = if labeled {
            labels.push(parse_label(fields[0]).ok_or(CliError::Label { line })?);
            &fields[1..]
        } else {
            &fields[..]
        };
        points.push(parse_features(line, features)?);
    }
    Ok(Table {
        points,
        labels: labeled.then_some(labels),
    })
}

//! Reading feature matrices and label files.

use std::fs;
use std::path::Path;

use crate::constraints::Label;
use crate::error::{Error, Result};
use crate::graph::DataMatrix;

/// Features plus the optional trailing label column.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub data: DataMatrix,
    pub labels: Option<Vec<Label>>,
}

fn parse_label(field: &str) -> Option<Label> {
    if let Ok(l) = field.parse::<Label>() {
        return Some(l);
    }
    let x: f64 = field.parse().ok()?;
    (x.fract() == 0.0 && x.abs() < 1e15).then_some(x as Label)
}

/// Parses CSV text. A first row that does not parse as numbers is taken as a
/// header. With `label_column`, the last column holds integer labels.
pub fn parse_csv(text: &str, label_column: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::input(format!("csv: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let fields: Vec<&str> = record.iter().collect();
        let (features, label) = if label_column {
            match fields.split_last() {
                Some((last, rest)) if !rest.is_empty() => (rest, Some(*last)),
                _ => {
                    return Err(Error::input(format!(
                        "row {}: need features and a label",
                        line + 1
                    )))
                }
            }
        } else {
            (&fields[..], None)
        };
        let parsed: std::result::Result<Vec<f64>, _> =
            features.iter().map(|f| f.parse::<f64>()).collect();
        let label = label.map(parse_label);
        match (parsed, label) {
            (Ok(values), None) | (Ok(values), Some(Some(_))) => {
                rows.push(values);
                if let Some(Some(l)) = label {
                    labels.push(l);
                }
            }
            _ if line == 0 && rows.is_empty() => continue,
            (Err(e), _) => return Err(Error::input(format!("row {}: {e}", line + 1))),
            (Ok(_), Some(None)) => {
                return Err(Error::input(format!(
                    "row {}: label is not an integer",
                    line + 1
                )));
            }
        }
    }
    let data = DataMatrix::from_rows(&rows)?;
    Ok(Dataset {
        data,
        labels: label_column.then_some(labels),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path, label_column: bool) -> Result<Dataset> {
    parse_csv(&read_text(path)?, label_column)
}

/// One integer label per line, or the last field of comma-separated lines.
/// Blank lines, `#` comments and a non-numeric first line are skipped.
pub fn parse_labels(text: &str) -> Result<Vec<Label>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let field = line.rsplit(',').next().unwrap().trim();
        match parse_label(field) {
            Some(l) => labels.push(l),
            None if labels.is_empty() && i == 0 => {}
            None => return Err(Error::input(format!("line {}: bad label {field:?}", i + 1))),
        }
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    parse_labels(&read_text(path)?)
}

//! CSV ingestion and output helpers.

use std::fs;
use std::path::Path;

use ddalpha::Matrix;

use crate::CliError;

/// A parsed data file: numeric feature columns plus an optional label
/// column.
pub struct Table {
    pub feature_names: Vec<String>,
    pub points: Matrix,
    pub labels: Option<Vec<String>>,
}

impl Table {
    /// Class indices by first appearance of each label.
    pub fn encode_labels(&self) -> Option<(Vec<usize>, Vec<String>)> {
        let labels = self.labels.as_ref()?;
        let mut names: Vec<String> = Vec::new();
        let idx = labels
            .iter()
            .map(|l| match names.iter().position(|n| n == l) {
                Some(i) => i,
                None => {
                    names.push(l.clone());
                    names.len() - 1
                }
            })
            .collect();
        Some((idx, names))
    }
}

/// Reads `path`. With `require_label`, a missing label column is an error;
/// otherwise the column is used when present.
pub fn read_table(path: &Path, label: &str, require_label: bool) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_col = headers.iter().position(|h| h == label);
    if require_label && label_col.is_none() {
        return Err(CliError::input(format!(
            "{}: label column '{label}' not found (columns: {})",
            path.display(),
            headers.join(", ")
        )));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != label_col).collect();
    if feature_cols.is_empty() {
        return Err(CliError::input(format!("{}: no feature columns", path.display())));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        for &c in &feature_cols {
            let cell = &rec[c];
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(format!(
                    "{}: line {line}, column '{}': '{cell}' is not a number",
                    path.display(),
                    headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "{}: line {line}, column '{}': value is not finite",
                    path.display(),
                    headers[c]
                )));
            }
            data.push(v);
        }
        if let Some(c) = label_col {
            if rec[c].is_empty() {
                return Err(CliError::input(format!(
                    "{}: line {line}: empty label",
                    path.display()
                )));
            }
            labels.push(rec[c].to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let points = Matrix::new(rows, feature_cols.len(), data)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(Table {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        points,
        labels: label_col.map(|_| labels),
    })
}

/// Comment line opening every CSV the tool writes.
pub fn header_line(seed: u64) -> String {
    format!("# ddalpha {} seed={seed}\n", env!("CARGO_PKG_VERSION"))
}

/// Writes `rows` as CSV under the comment header.
pub fn write_csv(
    path: &Path,
    seed: u64,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut out = header_line(seed).into_bytes();
    out.extend(body);
    write_file(path, &out)
}

/// Writes text that already has its own CSV header under the comment
/// header.
pub fn write_text_csv(path: &Path, seed: u64, body: &str) -> Result<(), CliError> {
    write_file(path, format!("{}{body}", header_line(seed)).as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

//! CSV ingestion and emission. A header row is required; the target column
//! is `y` unless overridden. Non-numeric cells are reported with their row
//! and column, never coerced.

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub struct CsvTable {
    pub headers: Vec<String>,
    /// Row-major cells, untyped.
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &str) -> CliResult<CsvTable> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    if raw.trim().is_empty() {
        return Ok(CsvTable {
            headers: Vec::new(),
            rows: Vec::new(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{path}: cannot read header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{path}: data row {}: {e}", i + 1)))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(CsvTable { headers, rows })
}

fn parse_cell(table_path: &str, cell: &str, row: usize, col: &str) -> CliResult<f64> {
    cell.parse::<f64>().map_err(|_| {
        CliError::Input(format!(
            "{table_path}: non-numeric value {cell:?} at data row {row}, column {col:?}"
        ))
    })
}

/// Numeric feature matrix and raw target strings. Features are every column
/// except the target, in header order.
pub struct LoadedData {
    pub x: DMatrix<f64>,
    pub target_raw: Vec<String>,
}

pub fn load_features_and_target(path: &str, target: &str) -> CliResult<LoadedData> {
    let table = read_table(path)?;
    if table.headers.is_empty() {
        return Ok(LoadedData {
            x: DMatrix::zeros(0, 0),
            target_raw: Vec::new(),
        });
    }
    let target_idx = table
        .headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| {
            CliError::Input(format!(
                "{path}: target column {target:?} not found (headers: {})",
                table.headers.join(", ")
            ))
        })?;
    let feature_idx: Vec<usize> = (0..table.headers.len()).filter(|&i| i != target_idx).collect();
    if feature_idx.is_empty() {
        return Err(CliError::Input(format!("{path}: no feature columns besides {target:?}")));
    }

    let n = table.rows.len();
    let mut x = DMatrix::zeros(n, feature_idx.len());
    let mut target_raw = Vec::with_capacity(n);
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.headers.len() {
            return Err(CliError::Input(format!(
                "{path}: data row {} has {} cells, header has {}",
                r + 1,
                row.len(),
                table.headers.len()
            )));
        }
        for (c, &idx) in feature_idx.iter().enumerate() {
            x[(r, c)] = parse_cell(path, &row[idx], r + 1, &table.headers[idx])?;
        }
        target_raw.push(row[target_idx].clone());
    }
    Ok(LoadedData { x, target_raw })
}

pub fn parse_numeric_target(path: &str, target: &str, raw: &[String]) -> CliResult<DVector<f64>> {
    let mut y = DVector::zeros(raw.len());
    for (i, cell) in raw.iter().enumerate() {
        y[i] = parse_cell(path, cell, i + 1, target)?;
    }
    Ok(y)
}

/// Feature matrix for prediction: drops the target column if present.
pub fn load_features(path: &str, target: &str) -> CliResult<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(path)?;
    if table.headers.is_empty() {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let feature_idx: Vec<usize> = (0..table.headers.len())
        .filter(|&i| table.headers[i] != target)
        .collect();
    let n = table.rows.len();
    let mut x = DMatrix::zeros(n, feature_idx.len());
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.headers.len() {
            return Err(CliError::Input(format!(
                "{path}: data row {} has {} cells, header has {}",
                r + 1,
                row.len(),
                table.headers.len()
            )));
        }
        for (c, &idx) in feature_idx.iter().enumerate() {
            x[(r, c)] = parse_cell(path, &row[idx], r + 1, &table.headers[idx])?;
        }
    }
    let names = feature_idx.iter().map(|&i| table.headers[i].clone()).collect();
    Ok((names, x))
}

pub fn write_csv(path: &str, headers: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

//! CSV ingestion and deterministic file emission.
//!
//! The CSV dialect is deliberately small: a header row of column names,
//! then numeric cells separated by commas. `load_csv` standardizes the
//! features (and the regression target), drops constant columns, and
//! splits 80/20 with a seeded shuffle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use srm_core::data::{standardize, DataSplit, Dataset, Split, Targets};

use crate::CliError;

/// Parses a numeric CSV with a header row into a standardized 80/20
/// train/test split.
pub fn load_csv(path: &str, target_column: &str, seed: u64) -> Result<DataSplit, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{path}: missing header row")))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.iter().any(|c| c.is_empty() || c.parse::<f64>().is_ok()) {
        return Err(CliError::config(format!(
            "{path}: first row must be a header of column names"
        )));
    }
    let target_idx = columns
        .iter()
        .position(|&c| c == target_column)
        .ok_or_else(|| CliError::config(format!("{path}: no column named `{target_column}`")))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(CliError::config(format!(
                "{path}: row {} has {} cells, expected {}",
                lineno + 1,
                cells.len(),
                columns.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len() - 1);
        for (j, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                CliError::config(format!(
                    "{path}: row {}, column `{}`: non-numeric cell `{cell}`",
                    lineno + 1,
                    columns[j]
                ))
            })?;
            if j == target_idx {
                targets.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::config(format!("{path}: no data rows")));
    }

    let (train_idx, test_idx) = srm_core::data::split_80_20(rows.len(), seed);
    let pick = |idx: &[usize], split: Split| -> Result<Dataset, CliError> {
        let r: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        Dataset::from_rows(&r, Targets::Real(t), split)
            .map_err(|e| CliError::config(format!("{path}: {e}")))
    };
    let mut train = pick(&train_idx, Split::Train)?;
    let mut test = pick(&test_idx, Split::Test)?;
    let info = standardize(&mut train, &mut test);
    for note in &info.notes {
        eprintln!("{path}: {note}");
    }
    Ok(DataSplit { train, test })
}

/// Writes a dataset in the same CSV format `load_csv` ingests.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut out = String::new();
    let d = data.dim();
    for j in 0..d {
        out.push_str(&format!("f{j},"));
    }
    match &data.targets {
        Targets::Real(_) => out.push_str("target"),
        Targets::Class { .. } => out.push_str("label"),
        Targets::None => {
            out.push_str("label,outlier");
        }
    }
    out.push('\n');
    for i in 0..data.n() {
        for j in 0..d {
            out.push_str(&format!("{},", data.feature(i, j)));
        }
        match &data.targets {
            Targets::Real(y) => out.push_str(&format!("{}", y[i])),
            Targets::Class { labels, .. } => out.push_str(&format!("{}", labels[i])),
            Targets::None => {
                let label = data.cluster_label.get(i).copied().unwrap_or(0);
                let outlier = data.outlier.get(i).copied().unwrap_or(false) as u8;
                out.push_str(&format!("{label},{outlier}"));
            }
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Creates the directory (if needed) and writes the file atomically
/// enough for our purposes.
pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(content.as_bytes())
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn out_path(dir: &str, name: &str) -> PathBuf {
    Path::new(dir).join(name)
}

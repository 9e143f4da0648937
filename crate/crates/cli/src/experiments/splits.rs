use std::path::Path;

use crate::error::{CliError, Result};
use crate::io::{load_csv_dataset, Dataset, Schema};

/// One train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub index: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Every `train_<i>.csv` in `dir` with its matching `test_<i>.csv`, in
/// increasing `i`.
pub fn load_splits(dir: &Path, schema: Schema, has_header: bool) -> Result<Vec<Split>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(i) = name
            .strip_prefix("train_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            indices.push(i);
        }
    }
    if indices.is_empty() {
        return Err(CliError::Data(format!("{}: no train_<i>.csv files", dir.display())));
    }
    indices.sort_unstable();
    indices
        .into_iter()
        .map(|i| {
            let test_path = dir.join(format!("test_{i}.csv"));
            if !test_path.exists() {
                return Err(CliError::Data(format!("{}: missing", test_path.display())));
            }
            let train = load_csv_dataset(&dir.join(format!("train_{i}.csv")), schema, has_header)?;
            let test = load_csv_dataset(&test_path, schema, has_header)?;
            if train.inputs.ncols() != test.inputs.ncols() {
                return Err(CliError::Data(format!(
                    "split {i}: train has {} features, test has {}",
                    train.inputs.ncols(),
                    test.inputs.ncols()
                )));
            }
            Ok(Split { index: i, train, test })
        })
        .collect()
}

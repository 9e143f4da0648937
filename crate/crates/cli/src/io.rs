//! CSV datasets, posterior files and plot-ready outputs. Every file is
//! written atomically through a temporary file in the target directory.

use std::io::Write;
use std::path::Path;

use fsvi::{Hyperparameters, VariationalPosterior};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Write `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Last column is a real-valued target.
    Regression,
    /// Last column is a 0/1 label.
    Binary,
    /// Last `K` columns are a one-hot label.
    OneHot(usize),
}

impl Schema {
    fn target_columns(self) -> usize {
        match self {
            Schema::Regression | Schema::Binary => 1,
            Schema::OneHot(k) => k,
        }
    }
}

/// Inputs (one row per datum) and targets (one column, or `K` one-hot
/// columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn target_vector(&self) -> DVector<f64> {
        self.targets.column(0).into_owned()
    }

    /// Class index per row (binary labels or one-hot position).
    pub fn class_labels(&self) -> Vec<usize> {
        if self.targets.ncols() == 1 {
            self.targets.column(0).iter().map(|&y| y as usize).collect()
        } else {
            self.targets
                .row_iter()
                .map(|r| fsvi::eval::argmax_lowest(r.iter().cloned()))
                .collect()
        }
    }
}

/// Load a rectangular numeric CSV. Errors name the offending line.
pub fn load_csv_dataset(path: &Path, schema: Schema, has_header: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let where_ = |line: u64| format!("{}:{line}", path.display());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::Data(format!("{}: column {}: '{cell}' is not a finite number", where_(line), col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::Data(format!(
                    "{}: expected {w} columns, found {}",
                    where_(line),
                    values.len()
                )))
            }
            _ => {}
        }
        let k = schema.target_columns();
        if values.len() <= k {
            return Err(CliError::Data(format!(
                "{}: need at least {} columns for this schema",
                where_(line),
                k + 1
            )));
        }
        let labels = &values[values.len() - k..];
        match schema {
            Schema::Regression => {}
            Schema::Binary => {
                if labels[0] != 0.0 && labels[0] != 1.0 {
                    return Err(CliError::Data(format!(
                        "{}: label {} is not 0 or 1",
                        where_(line),
                        labels[0]
                    )));
                }
            }
            Schema::OneHot(_) => {
                let ones = labels.iter().filter(|&&v| v == 1.0).count();
                let zeros = labels.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != k {
                    return Err(CliError::Data(format!("{}: label columns are not one-hot", where_(line))));
                }
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let cols = rows[0].len();
    let k = schema.target_columns();
    let n = rows.len();
    Ok(Dataset {
        inputs: DMatrix::from_fn(n, cols - k, |i, j| rows[i][j]),
        targets: DMatrix::from_fn(n, k, |i, j| rows[i][cols - k + j]),
    })
}

/// Write inputs followed by targets, one datum per line, no header.
pub fn save_csv_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..data.len() {
        let row: Vec<String> = data
            .inputs
            .row(i)
            .iter()
            .chain(data.targets.row(i).iter())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(|e| CliError::Data(e.to_string()))?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)
}

pub const POSTERIOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PosteriorFile {
    format_version: u32,
    dim: usize,
    seed: u64,
    alpha: f64,
    beta: Option<f64>,
    blocks: Vec<usize>,
    mu: Vec<f64>,
    /// Row-major `dim x dim`.
    l: Vec<f64>,
}

/// A stored posterior with its hyperparameters and the seed of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPosterior {
    pub posterior: VariationalPosterior,
    pub hyper: Hyperparameters,
    pub seed: u64,
}

pub fn posterior_to_string(post: &VariationalPosterior, hyper: &Hyperparameters, seed: u64) -> Result<String> {
    let m = post.dim();
    let file = PosteriorFile {
        format_version: POSTERIOR_FORMAT_VERSION,
        dim: m,
        seed,
        alpha: hyper.alpha,
        beta: hyper.beta,
        blocks: post.blocks().to_vec(),
        mu: post.mu().iter().cloned().collect(),
        l: (0..m * m).map(|k| post.l()[(k / m, k % m)]).collect(),
    };
    toml::to_string(&file).map_err(|e| CliError::Data(format!("cannot serialise posterior: {e}")))
}

pub fn posterior_from_str(text: &str) -> Result<StoredPosterior> {
    let file: PosteriorFile =
        toml::from_str(text).map_err(|e| CliError::Data(format!("malformed posterior file: {e}")))?;
    if file.format_version != POSTERIOR_FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "posterior format version {} is not supported (expected {POSTERIOR_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let m = file.dim;
    if file.mu.len() != m {
        return Err(CliError::Data(format!("dim is {m} but mu has {} entries", file.mu.len())));
    }
    if file.l.len() != m * m {
        return Err(CliError::Data(format!("dim is {m} but L has {} entries", file.l.len())));
    }
    let invalid = |e: fsvi::Error| CliError::Data(format!("invalid posterior: {e}"));
    let posterior = VariationalPosterior::with_blocks(
        DVector::from_vec(file.mu),
        DMatrix::from_row_slice(m, m, &file.l),
        file.blocks,
    )
    .map_err(invalid)?;
    let hyper = Hyperparameters::new(file.alpha, file.beta).map_err(invalid)?;
    Ok(StoredPosterior {
        posterior,
        hyper,
        seed: file.seed,
    })
}

pub fn save_posterior(path: &Path, post: &VariationalPosterior, hyper: &Hyperparameters, seed: u64) -> Result<()> {
    write_atomic(path, posterior_to_string(post, hyper, seed)?.as_bytes())
}

pub fn load_posterior(path: &Path) -> Result<StoredPosterior> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    posterior_from_str(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// A small named table written as CSV with a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, T>(&mut self, row: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Data(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }
}

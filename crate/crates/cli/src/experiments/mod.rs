//! One pipeline per experiment kind. Each returns an [`Outcome`] that
//! [`run_experiment`] writes to the output directory.

use std::path::{Path, PathBuf};

use fsvi::posterior::stream_rng;
use fsvi::{Hyperparameters, TraceRow, VariationalPosterior};
use rand::RngCore;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::io::{save_posterior, Table};

mod bivariate;
mod blr;
mod classification;
mod denoising;
mod flat_regression;
mod splits;

pub use splits::{load_splits, Split};

/// In-memory results of one pipeline run.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Named scalar results in insertion order.
    pub metrics: Vec<(String, f64)>,
    /// Bound traces, labelled by run.
    pub traces: Vec<(String, Vec<TraceRow>)>,
    pub posteriors: Vec<(String, VariationalPosterior, Hyperparameters)>,
    pub tables: Vec<Table>,
    /// Human-readable notes, such as skipped inputs.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn push_metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Paths of everything a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub metrics_file: PathBuf,
    pub trace_file: PathBuf,
    pub posterior_files: Vec<PathBuf>,
    pub extra_files: Vec<PathBuf>,
}

/// Seed for an independent sub-task of a run.
pub(crate) fn sub_seed(seed: u64, tag: u64) -> u64 {
    stream_rng(seed, 1000 + tag).next_u64()
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run the pipeline for `config.experiment` without touching the disk
/// (except to read input data).
pub fn run_pipeline(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        ExperimentKind::Bivariate => bivariate::run(config),
        ExperimentKind::Blr => blr::run(config),
        ExperimentKind::BlrOverfit => blr::run_overfit(config),
        ExperimentKind::Logistic => classification::run_binary(config),
        ExperimentKind::Multiclass => classification::run_multiclass(config),
        ExperimentKind::CauchyPpca => denoising::run(config),
        ExperimentKind::FlatRegression => flat_regression::run(config),
    }
}

/// Run the pipeline and write metrics, traces, posteriors and tables under
/// `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let outcome = run_pipeline(config)?;
    write_outcome(&config.out, config.seed, &outcome)
}

pub fn write_outcome(dir: &Path, seed: u64, outcome: &Outcome) -> Result<RunArtifacts> {
    let mut metrics = Table::new("metrics", &["metric", "value"]);
    for (name, value) in &outcome.metrics {
        metrics.push([name.clone(), format!("{value:e}")]);
    }
    let metrics_file = dir.join("metrics.csv");
    metrics.write(&metrics_file)?;

    let mut trace = Table::new("trace", &["run", "iteration", "train_bound", "holdout_bound"]);
    for (run, rows) in &outcome.traces {
        for r in rows {
            trace.push([
                run.clone(),
                r.iteration.to_string(),
                format!("{:e}", r.train_bound),
                r.holdout_bound.map(|h| format!("{h:e}")).unwrap_or_default(),
            ]);
        }
    }
    let trace_file = dir.join("trace.csv");
    trace.write(&trace_file)?;

    let mut posterior_files = Vec::new();
    for (name, post, hyper) in &outcome.posteriors {
        let path = dir.join(format!("posterior_{name}.toml"));
        save_posterior(&path, post, hyper, seed)?;
        posterior_files.push(path);
    }
    let mut extra_files = Vec::new();
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.name));
        table.write(&path)?;
        extra_files.push(path);
    }
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        metrics_file,
        trace_file,
        posterior_files,
        extra_files,
    })
}

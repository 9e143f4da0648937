//! Binary (logistic) and multiclass (softmax) classification on RBF
//! features, scored by test accuracy of the Monte-Carlo predictive.

use fsvi::eval::{accuracy, predictive_mc, LogisticPredictor, PredictionMode, Predictor, SoftmaxPredictor};
use fsvi::models::data::{synth_classification_data, BlobKind};
use fsvi::models::{LogisticRegression, RbfDesign, SoftmaxRegression};
use fsvi::{fit, FitReport, TargetModel};
use nalgebra::DMatrix;

use super::{load_splits, mean_sd, sub_seed, Outcome, Split};
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::io::{Dataset, Schema, Table};

#[derive(Debug, Clone, Copy)]
enum Task {
    Binary,
    Multiclass(usize),
}

impl Task {
    fn default_width(self) -> f64 {
        match self {
            Task::Binary => 0.5,
            Task::Multiclass(_) => 1.0,
        }
    }

    fn default_centres(self) -> usize {
        match self {
            Task::Binary => 50,
            Task::Multiclass(_) => 30,
        }
    }
}

fn synthetic_splits(config: &ExperimentConfig, task: Task) -> Result<Vec<Split>> {
    let n_train = config.model.n_train.unwrap_or(200);
    let n_test = config.model.n_test.unwrap_or(1000);
    let kind = match task {
        Task::Binary => BlobKind::TwoClass {
            separation: config.model.separation.unwrap_or(3.5),
        },
        Task::Multiclass(classes) => BlobKind::KClass {
            classes,
            radius: config.model.separation.unwrap_or(3.0),
        },
    };
    (0..config.model.splits.unwrap_or(1))
        .map(|i| {
            let seed = sub_seed(config.seed.wrapping_add(i as u64), 0);
            let all = synth_classification_data(&kind, n_train + n_test, seed).context("synthetic data")?;
            let targets = match task {
                Task::Binary => DMatrix::from_column_slice(all.len(), 1, all.binary_labels().as_slice()),
                Task::Multiclass(_) => all.one_hot(),
            };
            let take = |from: usize, n: usize| Dataset {
                inputs: all.inputs.rows(from, n).into_owned(),
                targets: targets.rows(from, n).into_owned(),
            };
            Ok(Split {
                index: i,
                train: take(0, n_train),
                test: take(n_train, n_test),
            })
        })
        .collect()
}

fn splits_for(config: &ExperimentConfig, task: Task) -> Result<Vec<Split>> {
    match &config.data {
        Some(dir) => {
            let schema = match task {
                Task::Binary => Schema::Binary,
                Task::Multiclass(k) => Schema::OneHot(k),
            };
            let mut splits = load_splits(dir, schema, config.model.csv_header.unwrap_or(false))?;
            if let Some(limit) = config.model.splits {
                splits.truncate(limit);
            }
            Ok(splits)
        }
        None => synthetic_splits(config, task),
    }
}

struct SplitResult {
    accuracy: f64,
    report: FitReport,
}

fn run_split(config: &ExperimentConfig, task: Task, split: &Split) -> Result<SplitResult> {
    let width = config.model.width.unwrap_or(task.default_width());
    let centres = config.model.centres.unwrap_or(task.default_centres());
    let rbf = RbfDesign::from_inputs(&split.train.inputs, Some(centres), width).context("RBF design")?;
    let phi_train = rbf.design(&split.train.inputs).context("training design")?;
    let phi_test = rbf.design(&split.test.inputs).context("test design")?;
    let seed = config.seed.wrapping_add(split.index as u64);
    let ctx = format!("split {}", split.index);

    let (model, predictor): (Box<dyn TargetModel>, Box<dyn Predictor + '_>) = match task {
        Task::Binary => (
            Box::new(LogisticRegression::new(phi_train, split.train.target_vector()).context(ctx.clone())?),
            Box::new(LogisticPredictor { design: &phi_test }),
        ),
        Task::Multiclass(classes) => (
            Box::new(SoftmaxRegression::new(phi_train, split.train.targets.clone()).context(ctx.clone())?),
            Box::new(SoftmaxPredictor {
                design: &phi_test,
                classes,
            }),
        ),
    };
    let report = fit(model.as_ref(), &config.fit_config(), sub_seed(seed, 1)).context(format!("{ctx}: fit"))?;
    let draws = config.model.predictive_draws.unwrap_or(200);
    let pred = predictive_mc(
        &report.posterior,
        predictor.as_ref(),
        PredictionMode::MonteCarlo {
            draws,
            seed: sub_seed(seed, 2),
        },
    )
    .context(format!("{ctx}: predictive"))?;
    let acc = accuracy(&pred.mean, &split.test.class_labels()).context(format!("{ctx}: accuracy"))?;
    Ok(SplitResult { accuracy: acc, report })
}

fn run_task(config: &ExperimentConfig, task: Task) -> Result<Outcome> {
    let splits = splits_for(config, task)?;
    let mut out = Outcome::default();
    let mut table = Table::new("accuracy", &["split", "accuracy", "iterations", "final_bound"]);
    let mut accs = Vec::new();
    for split in &splits {
        let r = run_split(config, task, split)?;
        table.push([
            split.index.to_string(),
            r.accuracy.to_string(),
            r.report.iterations.to_string(),
            r.report.final_bound().to_string(),
        ]);
        accs.push(r.accuracy);
        out.traces.push((format!("split{}", split.index), r.report.trace.clone()));
        if out.posteriors.is_empty() {
            out.posteriors.push((format!("split{}", split.index), r.report.posterior, r.report.hyper));
        }
    }
    let (mean, sd) = mean_sd(&accs);
    out.push_metric("accuracy_mean", mean);
    out.push_metric("accuracy_sd", sd);
    out.push_metric("splits", accs.len() as f64);
    out.notes.push(format!("accuracy {mean:.4} ± {sd:.4} over {} split(s)", accs.len()));
    out.tables.push(table);
    Ok(out)
}

pub fn run_binary(config: &ExperimentConfig) -> Result<Outcome> {
    run_task(config, Task::Binary)
}

pub fn run_multiclass(config: &ExperimentConfig) -> Result<Outcome> {
    run_task(config, Task::Multiclass(config.model.classes.unwrap_or(3)))
}


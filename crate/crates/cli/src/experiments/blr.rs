//! Bayesian linear regression on RBF features: agreement with the exact
//! posterior, and holdout monitoring for small sample sets.

use fsvi::baselines::exact_blr_posterior;
use fsvi::models::data::{regression_truth, synth_regression_data};
use fsvi::models::{RbfDesign, RbfRegression};
use fsvi::{fit, monitor_generalisation, FitReport, Regressor, Verdict, DEFAULT_OVERFIT_MARGIN};
use nalgebra::{DMatrix, DVector};

use super::{sub_seed, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context, Result};
use crate::io::Table;

const GRID_POINTS: usize = 200;
const SMALL_SAMPLES: usize = 10;

/// Training data, its RBF features and the model.
pub(crate) struct BlrProblem {
    pub inputs: DVector<f64>,
    pub rbf: RbfDesign,
    pub model: RbfRegression,
}

pub(crate) fn problem(config: &ExperimentConfig) -> Result<BlrProblem> {
    let n = config.model.n_train.unwrap_or(60);
    let centres = config.model.centres.unwrap_or(19);
    let width = config.model.width.unwrap_or(1.0);
    let (x, y) = synth_regression_data(n, sub_seed(config.seed, 0)).context("synthetic data")?;
    let inputs = DMatrix::from_column_slice(n, 1, x.as_slice());
    let rbf = RbfDesign::from_inputs(&inputs, Some(centres), width).context("RBF design")?;
    let design = rbf.design(&inputs).context("RBF design")?;
    let model = RbfRegression::from_design(design, y).context("model")?;
    Ok(BlrProblem { inputs: x, rbf, model })
}

fn fit_with(problem: &BlrProblem, config: &ExperimentConfig, samples: usize) -> Result<FitReport> {
    let mut fc = config.fit_config();
    fc.samples = samples;
    fit(&problem.model, &fc, sub_seed(config.seed, 1)).context(format!("fit with S = {samples}"))
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let p = problem(config)?;
    let report = fit_with(&p, config, config.samples)?;
    let alpha = report.hyper.alpha;
    let beta = report.hyper.beta.expect("Gaussian-noise model");
    let exact = exact_blr_posterior(p.model.design(), p.model.inner().targets(), alpha, beta)
        .context("exact posterior")?;

    let grid = DVector::from_fn(GRID_POINTS, |i, _| -6.0 + 12.0 * i as f64 / (GRID_POINTS - 1) as f64);
    let grid_inputs = DMatrix::from_column_slice(GRID_POINTS, 1, grid.as_slice());
    let phi = p.rbf.design(&grid_inputs).context("grid design")?;
    let cov_q = report.posterior.covariance();
    let mean_q = &phi * report.posterior.mu();
    let mean_e = &phi * &exact.mean;
    let sd = |cov: &DMatrix<f64>| (&phi * cov).component_mul(&phi).column_sum().map(|v| v.max(0.0).sqrt());
    let (sd_q, sd_e) = (sd(&cov_q), sd(&exact.covariance));

    let rmse = ((&mean_q - &mean_e).norm_squared() / GRID_POINTS as f64).sqrt();
    let cov_gap = (&cov_q - &exact.covariance).norm() / exact.covariance.norm();

    let mut out = Outcome::default();
    out.push_metric("mean_prediction_rmse", rmse);
    out.push_metric("covariance_relative_frobenius", cov_gap);
    out.push_metric("final_bound", report.final_bound());
    out.push_metric("alpha", alpha);
    out.push_metric("beta", beta);
    out.push_metric("iterations", report.iterations as f64);
    out.push_metric("converged", f64::from(u8::from(report.converged)));

    let mut pred = Table::new(
        "predictions",
        &["x", "truth", "proposed_mean", "proposed_sd", "exact_mean", "exact_sd"],
    );
    for i in 0..GRID_POINTS {
        pred.push([grid[i], regression_truth(grid[i]), mean_q[i], sd_q[i], mean_e[i], sd_e[i]]);
    }
    let mut cov = Table::new("covariance", &["row", "col", "proposed", "exact"]);
    let m = cov_q.nrows();
    for r in 0..m {
        for c in 0..m {
            cov.push([r.to_string(), c.to_string(), format!("{:e}", cov_q[(r, c)]), format!("{:e}", exact.covariance[(r, c)])]);
        }
    }
    let mut data = Table::new("data", &["x", "y"]);
    for (x, y) in p.inputs.iter().zip(p.model.inner().targets().iter()) {
        data.push([*x, *y]);
    }
    out.tables.extend([pred, cov, data]);
    out.traces.push(("proposed".into(), report.trace));
    out.posteriors.push(("proposed".into(), report.posterior, report.hyper));
    Ok(out)
}

/// Fits with the configured `S` and with `S = 10`, both monitored on the
/// same number of holdout draws.
pub fn run_overfit(config: &ExperimentConfig) -> Result<Outcome> {
    if config.holdout_samples == 0 {
        return Err(CliError::Config("blr-overfit needs holdout samples".into()));
    }
    if config.holdout_samples <= SMALL_SAMPLES {
        return Err(CliError::Config(format!("holdout samples must exceed {SMALL_SAMPLES}")));
    }
    let margin = config.model.overfit_margin.unwrap_or(DEFAULT_OVERFIT_MARGIN);
    let p = problem(config)?;
    let mut out = Outcome::default();
    for samples in [config.samples, SMALL_SAMPLES] {
        let report = fit_with(&p, config, samples)?;
        let verdict = monitor_generalisation(&report.trace, margin).context(format!("monitor, S = {samples}"))?;
        let last = report.trace.last().expect("trace is never empty");
        out.push_metric(format!("s{samples}_overfitting"), f64::from(u8::from(verdict == Verdict::Overfitting)));
        out.push_metric(format!("s{samples}_final_train_bound"), last.train_bound);
        out.push_metric(format!("s{samples}_final_holdout_bound"), last.holdout_bound.unwrap_or(f64::NAN));
        out.push_metric(format!("s{samples}_iterations"), report.iterations as f64);
        out.traces.push((format!("S={samples}"), report.trace));
        out.posteriors.push((format!("s{samples}"), report.posterior, report.hyper));
    }
    Ok(out)
}

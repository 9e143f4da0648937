//! Gaussian fits to skewed bivariate densities: the proposed fit against
//! the Laplace approximation, scored by numerical KL divergence.

use fsvi::baselines::{laplace_approximation, GaussianPosteriorExact, LaplaceConfig};
use fsvi::eval::{kld_numerical_2d, Direction, Grid2D};
use fsvi::models::{AzzaliniTarget, REFERENCE_COEFFICIENTS};
use fsvi::{fit, Hyperparameters};
use nalgebra::{DMatrix, DVector};

use super::{sub_seed, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::io::Table;

/// Grid used when an approximation spills outside the standard one.
fn wide_grid() -> Grid2D {
    Grid2D::square(16.0, 512).expect("valid grid")
}

/// `(KL(target || approx), KL(approx || target))`.
fn kld_pair(target: &AzzaliniTarget, approx: &GaussianPosteriorExact) -> Result<(f64, f64)> {
    let log_p = |x: f64, y: f64| target.log_density([x, y]);
    let log_q = |x: f64, y: f64| approx.log_density(&DVector::from_vec(vec![x, y]));
    let both = |grid: &Grid2D| -> fsvi::Result<(f64, f64)> {
        Ok((
            kld_numerical_2d(log_p, log_q, grid, Direction::PToQ)?,
            kld_numerical_2d(log_p, log_q, grid, Direction::QToP)?,
        ))
    };
    match both(&Grid2D::standard()) {
        Err(fsvi::Error::Coverage { .. }) => both(&wide_grid()).context("KL divergence on the wide grid"),
        other => other.context("KL divergence"),
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let targets = config.model.targets.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let mut out = Outcome::default();
    let mut table = Table::new(
        "kld",
        &[
            "target", "a1", "a2", "a3", "a4", "a5", "a6", "method", "kld_target_to_approx",
            "kld_approx_to_target", "mean_1", "mean_2", "cov_11", "cov_12", "cov_22",
        ],
    );
    let hyper = Hyperparameters::alpha(1.0).context("hyperparameters")?;
    for &i in &targets {
        let a = REFERENCE_COEFFICIENTS[i];
        let target = AzzaliniTarget::new(a);

        let report = fit(&target, &config.fit_config(), sub_seed(config.seed, i as u64))
            .context(format!("proposed fit, target {i}"))?;
        let proposed = GaussianPosteriorExact::new(report.posterior.mu().clone(), report.posterior.covariance())
            .context("proposed posterior")?;
        let laplace = laplace_approximation(
            &target,
            &hyper,
            &DVector::zeros(2),
            &LaplaceConfig::default(),
            sub_seed(config.seed, 10 + i as u64),
        )
        .context(format!("Laplace approximation, target {i}"))?;

        for (method, g) in [("proposed", &proposed), ("laplace", &laplace)] {
            let (pq, qp) = kld_pair(&target, g)?;
            out.push_metric(format!("target{i}_{method}_kld_target_to_approx"), pq);
            out.push_metric(format!("target{i}_{method}_kld_approx_to_target"), qp);
            let c: &DMatrix<f64> = &g.covariance;
            let mut row: Vec<String> = vec![i.to_string()];
            row.extend(a.iter().map(|v| v.to_string()));
            row.push(method.to_string());
            row.extend(
                [pq, qp, g.mean[0], g.mean[1], c[(0, 0)], c[(0, 1)], c[(1, 1)]]
                    .iter()
                    .map(|v| format!("{v:e}")),
            );
            table.push(row);
        }
        out.push_metric(format!("target{i}_proposed_iterations"), report.iterations as f64);
        out.traces.push((format!("target{i}"), report.trace.clone()));
        out.posteriors.push((format!("target{i}"), report.posterior, report.hyper));
    }
    out.tables.push(table);
    Ok(out)
}

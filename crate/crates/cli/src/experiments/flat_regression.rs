//! Nonlinear spectral-attenuation regression under a flat prior: the
//! proposed fit and the Laplace approximation over repeated random
//! train/test partitions, scored by posterior-averaged test error.

use fsvi::baselines::{laplace_approximation, GaussianPosteriorExact, LaplaceConfig};
use fsvi::eval::mse;
use fsvi::fit::Init;
use fsvi::models::{AttenuationModel, ATTENUATION_SOURCES};
use fsvi::{fit, GaussianNoise, Hyperparameters, Prior, Regressor, SampleSet, VariationalPosterior};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mean_sd, sub_seed, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::io::Table;

/// Physically plausible starting point: 100 bar for every source,
/// spherical spreading, Q = 200, kappa = 0.04.
fn nominal_start() -> DVector<f64> {
    let mut w = DVector::from_element(ATTENUATION_SOURCES + 3, 100f64.ln());
    w[ATTENUATION_SOURCES] = 1.0;
    w[ATTENUATION_SOURCES + 1] = 200f64.ln();
    w[ATTENUATION_SOURCES + 2] = 0.04;
    w
}

/// Test error averaged over posterior draws.
fn posterior_mse(post: &VariationalPosterior, test: &AttenuationModel, draws: usize, seed: u64) -> Result<f64> {
    let z = SampleSet::draw(draws, post.dim(), seed).context("posterior draws")?;
    let targets: Vec<f64> = test.targets().iter().cloned().collect();
    let mut total = 0.0;
    for zs in z.iter() {
        let pred: Vec<f64> = test.predict(&post.transform(zs)).iter().cloned().collect();
        total += mse(&pred, &targets).context("test error")?;
    }
    Ok(total / draws as f64)
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let m = &config.model;
    let n_train = m.n_train.unwrap_or(100);
    let n_test = m.n_test.unwrap_or(500);
    let splits = m.splits.unwrap_or(10);
    let noise_sd = m.noise_sd.unwrap_or(0.7);
    let draws = m.predictive_draws.unwrap_or(200);
    let pool = AttenuationModel::simulate(
        n_train + n_test,
        &AttenuationModel::reference_params(),
        noise_sd,
        sub_seed(config.seed, 0),
    )
    .context("synthetic records")?;

    let mut out = Outcome::default();
    let mut table = Table::new("splits", &["split", "proposed_mse", "laplace_mse", "laplace_status"]);
    let (mut proposed, mut laplace) = (Vec::new(), Vec::new());
    let mut failures = 0usize;
    for split in 0..splits {
        let seed = config.seed.wrapping_add(split as u64);
        let mut idx: Vec<usize> = (0..n_train + n_test).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, 1)));
        let train = GaussianNoise::new(pool.subset(&idx[..n_train]), Prior::Flat);
        let test = pool.subset(&idx[n_train..]);
        let ctx = format!("split {split}");

        let fc = fsvi::FitConfig {
            init: Init::MaximumLikelihood {
                max_iters: 500,
                start: Some(nominal_start()),
            },
            ..config.fit_config()
        };
        let report = fit(&train, &fc, sub_seed(seed, 2)).context(format!("{ctx}: proposed fit"))?;
        let p_mse = posterior_mse(&report.posterior, &test, draws, sub_seed(seed, 3))?;
        proposed.push(p_mse);

        // Mode and curvature at unit noise precision, then rescaled by the
        // maximum-likelihood noise precision at the mode.
        let unit = Hyperparameters::new(1.0, Some(1.0)).context("hyperparameters")?;
        let lap = laplace_approximation(&train, &unit, &nominal_start(), &LaplaceConfig::default(), sub_seed(seed, 4))
            .and_then(|g| {
                let resid = train.inner().residuals(&g.mean).norm_squared();
                let beta_hat = n_train as f64 / resid;
                GaussianPosteriorExact::new(g.mean, g.covariance / beta_hat)?.to_variational()
            });
        let (l_mse, status) = match lap {
            Ok(post) => (posterior_mse(&post, &test, draws, sub_seed(seed, 5))?, "ok".to_string()),
            Err(e) => {
                failures += 1;
                (f64::NAN, format!("failed: {e}"))
            }
        };
        if l_mse.is_finite() {
            laplace.push(l_mse);
        }
        table.push([split.to_string(), p_mse.to_string(), l_mse.to_string(), status]);
        out.traces.push((format!("split{split}"), report.trace.clone()));
        if split == 0 {
            out.posteriors.push(("split0".into(), report.posterior, report.hyper));
        }
    }
    let (pm, ps) = mean_sd(&proposed);
    out.push_metric("proposed_mse_mean", pm);
    out.push_metric("proposed_mse_sd", ps);
    if laplace.is_empty() {
        out.push_metric("laplace_mse_mean", f64::NAN);
        out.push_metric("laplace_mse_sd", f64::NAN);
    } else {
        let (lm, ls) = mean_sd(&laplace);
        out.push_metric("laplace_mse_mean", lm);
        out.push_metric("laplace_mse_sd", ls);
    }
    out.push_metric("laplace_failures", failures as f64);
    out.push_metric("splits", splits as f64);
    out.tables.push(table);
    Ok(out)
}

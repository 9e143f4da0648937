//! Denoising of pixel-corrupted low-rank images: Cauchy-noise PPCA fitted
//! through the bound against closed-form maximum-likelihood PPCA.

use fsvi::baselines::{ml_ppca_fit, MlPpca};
use fsvi::eval::reconstruction_error;
use fsvi::fit::Init;
use fsvi::models::data::{corrupt_pixels, synth_low_rank_images};
use fsvi::models::{CauchyPpca, CauchyPpcaParams};
use fsvi::{fit, fit_tunable, FitConfig, VariationalPosterior};
use nalgebra::{DMatrix, DVector};

use super::{sub_seed, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context, Result};
use crate::io::Table;

const PANEL_IMAGES: usize = 4;

/// Latent means stacked per observation, `L = 0.1 I` per block.
fn initial_posterior(latents: &DMatrix<f64>) -> Result<VariationalPosterior> {
    let (n, q) = latents.shape();
    let mu = DVector::from_iterator(n * q, latents.row_iter().flat_map(|r| r.iter().cloned().collect::<Vec<_>>()));
    VariationalPosterior::isotropic(mu, 0.1, vec![q; n]).context("initial latent posterior")
}

fn median_abs(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.map(f64::abs).collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn row_errors(original: &DMatrix<f64>, rec: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..original.nrows())
        .map(|i| {
            let o: Vec<f64> = original.row(i).iter().cloned().collect();
            let r: Vec<f64> = rec.row(i).iter().cloned().collect();
            reconstruction_error(&o, &r).context("reconstruction error")
        })
        .collect()
}

fn latent_config(config: &ExperimentConfig, init: VariationalPosterior) -> FitConfig {
    FitConfig {
        alpha: 1.0,
        update_alpha: false,
        init: Init::Given(init),
        ..config.fit_config()
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let m = &config.model;
    let height = m.image_height.unwrap_or(24);
    let width = m.image_width.unwrap_or(21);
    let n = m.n_train.unwrap_or(100);
    let n_test = m.n_test.unwrap_or(100);
    let q = m.latent_dim.unwrap_or(2);
    let corruption = m.corruption.unwrap_or(1.0 / 3.0);
    let noise_sd = m.noise_sd.unwrap_or(2.0);
    if q == 0 || q >= height * width {
        return Err(CliError::Config(format!("latent_dim must be in 1..{}", height * width)));
    }

    let clean = synth_low_rank_images(n + n_test, height, width, q, noise_sd, sub_seed(config.seed, 0));
    let corrupted = corrupt_pixels(&clean, corruption, sub_seed(config.seed, 1));
    let train = corrupted.rows(0, n).into_owned();
    let test = corrupted.rows(n, n_test).into_owned();
    let test_clean = clean.rows(n, n_test).into_owned();

    let ppca: MlPpca = ml_ppca_fit(&train, q).context("ML PPCA")?;
    let ppca_rec = ppca.reconstruct(&test).context("PPCA reconstruction")?;

    let train_rec = ppca.reconstruct(&train).context("PPCA reconstruction")?;
    let scale = median_abs((&train - &train_rec).iter().cloned()).max(1e-3);
    let params = CauchyPpcaParams::new(ppca.loading.clone(), ppca.offset.clone(), scale).context("Cauchy-PPCA start")?;
    let mut model = CauchyPpca::new(train.clone(), params).context("Cauchy-PPCA model")?;
    let init = initial_posterior(&ppca.latent_means(&train).context("PPCA latents")?)?;
    let train_report = fit_tunable(&mut model, &latent_config(config, init), sub_seed(config.seed, 2))
        .context("Cauchy-PPCA training fit")?;

    let test_model = CauchyPpca::new(test.clone(), model.params().clone()).context("Cauchy-PPCA test model")?;
    let init = initial_posterior(&ppca.latent_means(&test).context("PPCA latents")?)?;
    let test_report = fit(&test_model, &latent_config(config, init), sub_seed(config.seed, 3))
        .context("Cauchy-PPCA test latents")?;
    let cauchy_rec = test_model.reconstruct(test_report.posterior.mu());

    let ppca_err = row_errors(&test_clean, &ppca_rec)?;
    let cauchy_err = row_errors(&test_clean, &cauchy_rec)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let wins = ppca_err.iter().zip(&cauchy_err).filter(|(p, c)| c < p).count();

    let mut out = Outcome::default();
    out.push_metric("ppca_mean_error", mean(&ppca_err));
    out.push_metric("cauchy_ppca_mean_error", mean(&cauchy_err));
    out.push_metric("cauchy_ppca_wins", wins as f64);
    out.push_metric("test_images", n_test as f64);
    out.push_metric("cauchy_scale", model.params().scale);
    out.push_metric("train_iterations", train_report.iterations as f64);
    out.push_metric("test_iterations", test_report.iterations as f64);

    let mut errors = Table::new("reconstruction", &["image", "ppca_error", "cauchy_ppca_error"]);
    for i in 0..n_test {
        errors.push([i.to_string(), ppca_err[i].to_string(), cauchy_err[i].to_string()]);
    }
    let mut panel = Table::new("panel", &["image", "row", "col", "original", "corrupted", "ppca", "cauchy_ppca"]);
    for i in 0..PANEL_IMAGES.min(n_test) {
        for p in 0..height * width {
            panel.push([
                i.to_string(),
                (p / width).to_string(),
                (p % width).to_string(),
                test_clean[(i, p)].to_string(),
                test[(i, p)].to_string(),
                ppca_rec[(i, p)].to_string(),
                cauchy_rec[(i, p)].to_string(),
            ]);
        }
    }
    out.tables.extend([errors, panel]);
    out.traces.push(("train".into(), train_report.trace));
    out.traces.push(("test".into(), test_report.trace));
    Ok(out)
}

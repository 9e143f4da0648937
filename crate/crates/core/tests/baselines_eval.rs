mod common;

use std::f64::consts::PI;

use common::*;
use fsvi::baselines::{exact_blr_posterior, ml_ppca_fit};
use fsvi::eval::{
    accuracy, gaussian_kld, kld_numerical_2d, predictive_mc, Direction, Grid2D, LinearPredictor, PredictionMode,
};
use fsvi::{Regressor, VariationalPosterior};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn gaussian_log_density(m: DVector<f64>, s: DMatrix<f64>) -> impl Fn(f64, f64) -> f64 {
    let inv = s.clone().try_inverse().unwrap();
    let log_det = s.determinant().ln();
    move |x, y| {
        let d = DVector::from_vec(vec![x - m[0], y - m[1]]);
        -(2.0 * PI).ln() - 0.5 * log_det - 0.5 * d.dot(&(&inv * &d))
    }
}

#[test]
fn quadrature_matches_closed_form_gaussian_kld() {
    let grid = Grid2D::standard();
    let m0 = DVector::zeros(2);
    let s0 = DMatrix::identity(2, 2);
    let m1 = DVector::from_vec(vec![0.7, -0.4]);
    let s1 = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
    let p = gaussian_log_density(m0.clone(), s0.clone());
    let q = gaussian_log_density(m1.clone(), s1.clone());
    let pq = kld_numerical_2d(&p, &q, &grid, Direction::PToQ).unwrap();
    let qp = kld_numerical_2d(&p, &q, &grid, Direction::QToP).unwrap();
    assert!((pq - gaussian_kld(&m0, &s0, &m1, &s1).unwrap()).abs() < 1e-6);
    assert!((qp - gaussian_kld(&m1, &s1, &m0, &s0).unwrap()).abs() < 1e-6);
}

#[test]
fn random_guessing_has_chance_accuracy() {
    let mut r = rng(3);
    let n = 10_000;
    let probs = DMatrix::from_fn(n, 2, |_, _| r.random_range(0.0..1.0));
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let acc = accuracy(&probs, &labels).unwrap();
    assert!((acc - 0.5).abs() < 0.02, "{acc}");
}

#[test]
fn blr_predictive_mean_matches_exact_within_three_standard_errors() {
    let model = rbf_model(60, 20, 1);
    let exact = exact_blr_posterior(model.design(), model.inner().targets(), 0.5, 25.0).unwrap();
    let post = exact.to_variational().unwrap();
    let test_design = model.design().rows(0, 10).into_owned();
    let draws = 100_000;
    let s = predictive_mc(
        &post,
        &LinearPredictor { design: &test_design },
        PredictionMode::MonteCarlo { draws, seed: 4 },
    )
    .unwrap();
    let exact_mean = &test_design * &exact.mean;
    for i in 0..10 {
        let se = (s.variance[(i, 0)] / draws as f64).sqrt();
        assert!((s.mean[(i, 0)] - exact_mean[i]).abs() < 3.0 * se + 1e-12, "row {i}");
    }
}

#[test]
fn predictive_rejects_singular_factor() {
    let design = DMatrix::identity(2, 2);
    let post = VariationalPosterior::new(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
    assert!(predictive_mc(&post, &LinearPredictor { design: &design }, PredictionMode::monte_carlo(1)).is_err());
}

#[test]
fn isotropic_data_gives_small_loading() {
    let mut r = rng(5);
    let y = gaussian_matrix(&mut r, 20_000, 5);
    let fit = ml_ppca_fit(&y, 1).unwrap();
    assert!(fit.loading.column(0).norm() < 0.2, "{}", fit.loading.column(0).norm());
    assert!((fit.noise_var - 1.0).abs() < 0.05);
}

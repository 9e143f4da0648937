#![allow(dead_code)]

use fsvi::models::data::{synth_classification_data, synth_regression_data, BlobKind};
use fsvi::models::{
    AttenuationModel, AzzaliniTarget, CauchyPpca, CauchyPpcaParams, GaussianTarget, LogisticRegression,
    RbfDesign, RbfRegression, SoftmaxRegression, REFERENCE_COEFFICIENTS,
};
use fsvi::{GaussianNoise, Hyperparameters, Prior, TargetModel, VariationalPosterior};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

/// Design with a bias column followed by the given inputs.
pub fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

pub fn rbf_model(n: usize, centres: usize, seed: u64) -> RbfRegression {
    let (x, y) = synth_regression_data(n, seed).unwrap();
    let x = DMatrix::from_column_slice(n, 1, x.as_slice());
    let design = RbfDesign::from_inputs(&x, Some(centres), 1.0).unwrap();
    RbfRegression::from_design(design.design(&x).unwrap(), y).unwrap()
}

pub fn logistic_model(n: usize, seed: u64) -> LogisticRegression {
    let d = synth_classification_data(&BlobKind::TwoClass { separation: 3.0 }, n, seed).unwrap();
    LogisticRegression::new(with_bias(&d.inputs), d.binary_labels()).unwrap()
}

pub fn softmax_model(n: usize, classes: usize, seed: u64) -> SoftmaxRegression {
    let d = synth_classification_data(&BlobKind::KClass { classes, radius: 3.0 }, n, seed).unwrap();
    SoftmaxRegression::new(with_bias(&d.inputs), d.one_hot()).unwrap()
}

pub fn cauchy_model(n: usize, d: usize, q: usize, seed: u64) -> CauchyPpca {
    let mut r = rng(seed);
    let loading = gaussian_matrix(&mut r, d, q);
    let offset = DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0));
    let data = gaussian_matrix(&mut r, n, d) * 2.0;
    CauchyPpca::new(data, CauchyPpcaParams::new(loading, offset, 0.7).unwrap()).unwrap()
}

pub fn attenuation_model(n: usize, seed: u64) -> GaussianNoise<AttenuationModel> {
    let m = AttenuationModel::simulate(n, &AttenuationModel::reference_params(), 0.3, seed).unwrap();
    GaussianNoise::new(m, Prior::Flat)
}

pub fn gaussian_target() -> GaussianTarget {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
    GaussianTarget::new(DVector::from_vec(vec![1.0, -1.0, 0.5]), &cov).unwrap()
}

pub fn azzalini_models() -> Vec<AzzaliniTarget> {
    REFERENCE_COEFFICIENTS.iter().map(|a| AzzaliniTarget::new(*a)).collect()
}

/// Well-conditioned random posterior: each block is `scale (I + 0.3 G)`.
pub fn random_posterior(
    r: &mut ChaCha8Rng,
    centre: &DVector<f64>,
    spread: f64,
    blocks: Vec<usize>,
    scale: f64,
) -> VariationalPosterior {
    let m = centre.len();
    let mu = centre + gaussian_matrix(r, m, 1).column(0) * spread;
    let factors: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|&b| (DMatrix::identity(b, b) + gaussian_matrix(r, b, b) * 0.3) * scale)
        .collect();
    VariationalPosterior::from_block_factors(mu, &factors).unwrap()
}

pub fn random_hyper<M: TargetModel>(r: &mut ChaCha8Rng, model: &M) -> Hyperparameters {
    let alpha = r.random_range(0.2..3.0);
    let beta = model.regressor().map(|_| r.random_range(0.5..20.0));
    Hyperparameters::new(alpha, beta).unwrap()
}

pub fn blocks_of<M: TargetModel + ?Sized>(model: &M) -> Vec<usize> {
    model.posterior_blocks().unwrap_or_else(|| vec![model.dim()])
}

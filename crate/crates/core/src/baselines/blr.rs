use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::bound::kl_gaussian_prior;
use crate::error::{Error, Result};
use crate::posterior::VariationalPosterior;

/// A full-covariance Gaussian `N(mean, covariance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosteriorExact {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPosteriorExact {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if covariance.shape() != (m, m) {
            return Err(Error::dim(m, covariance.nrows(), "covariance size"));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * (1.0 + covariance.amax()) {
            return Err(Error::InvalidPosterior(format!("covariance asymmetric by {asym:e}")));
        }
        if Cholesky::new(covariance.clone()).is_none() {
            return Err(Error::InvalidPosterior("covariance is not positive definite".into()));
        }
        Ok(GaussianPosteriorExact { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        Cholesky::new(self.covariance.clone())
            .expect("validated at construction")
            .l()
    }

    pub fn log_density(&self, w: &DVector<f64>) -> f64 {
        let chol = Cholesky::new(self.covariance.clone()).expect("validated at construction");
        let d = w - &self.mean;
        let sol = chol.l().solve_lower_triangular(&d).expect("nonsingular factor");
        let log_det: f64 = chol.l().diagonal().iter().map(|x| x.ln()).sum();
        -0.5 * self.dim() as f64 * (2.0 * PI).ln() - log_det - 0.5 * sol.norm_squared()
    }

    /// The same Gaussian as a variational posterior with a Cholesky factor.
    pub fn to_variational(&self) -> Result<VariationalPosterior> {
        VariationalPosterior::new(self.mean.clone(), self.cholesky_factor())
    }
}

/// Conjugate posterior for `y = Phi w + noise`, `w ~ N(0, alpha^-1 I)`,
/// noise precision `beta`: covariance `(alpha I + beta Phi^T Phi)^-1` and
/// mean `beta cov Phi^T y`.
pub fn exact_blr_posterior(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> Result<GaussianPosteriorExact> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("alpha and beta must be positive, got {alpha}, {beta}")));
    }
    if design.nrows() != targets.len() {
        return Err(Error::dim(design.nrows(), targets.len(), "targets vs design rows"));
    }
    let m = design.ncols();
    let mut precision = design.tr_mul(design) * beta;
    for i in 0..m {
        precision[(i, i)] += alpha;
    }
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::InvalidPosterior("posterior precision not positive definite".into()))?;
    let mean = chol.solve(&(design.tr_mul(targets) * beta));
    let cov = chol.inverse();
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianPosteriorExact::new(mean, cov)
}

/// The bound for a linear-Gaussian model with the expectation taken in
/// closed form (the infinite-sample limit of the sampled bound):
/// `N/2 ln(beta / 2 pi) - beta/2 (|y - Phi mu|^2 + |Phi L|_F^2) - KL`.
pub fn expected_bound_linear_gaussian(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    post: &VariationalPosterior,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if design.ncols() != post.dim() {
        return Err(Error::dim(post.dim(), design.ncols(), "design columns vs posterior"));
    }
    let n = targets.len() as f64;
    let resid = targets - design * post.mu();
    let spread = (design * post.l()).norm_squared();
    let ell = 0.5 * n * (beta / (2.0 * PI)).ln() - 0.5 * beta * (resid.norm_squared() + spread);
    Ok(ell - kl_gaussian_prior(post, alpha)?)
}

//! Target models: anything exposing a log-likelihood and its gradient with
//! respect to the parameters `w`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::posterior::Hyperparameters;

mod attenuation;
mod azzalini;
mod cauchy_ppca;
pub mod data;
mod gaussian;
mod logistic;
mod rbf;
mod softmax;

pub use attenuation::{AttenuationModel, AttenuationRecord, ATTENUATION_PARAMS, SOURCES as ATTENUATION_SOURCES};
pub use azzalini::{azzalini_h, log_normal_cdf, AzzaliniTarget, REFERENCE_COEFFICIENTS};
pub use cauchy_ppca::{cauchy_ppca_loglik, CauchyPpca, CauchyPpcaEval, CauchyPpcaParams};
pub use gaussian::{GaussianTarget, ZeroLikelihood};
pub use logistic::{log_sigmoid, sigmoid, LogisticRegression};
pub use rbf::{LinearBasis, RbfDesign, RbfRegression};
pub use softmax::{log_softmax_row, SoftmaxRegression};

/// Prior over the model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// `N(0, alpha^-1 I)` with `alpha` taken from the hyperparameters.
    Gaussian,
    /// Improper `p(w) ∝ 1`; the bound uses the entropy of `q` instead of a KL.
    Flat,
}

/// A differentiable log-likelihood over a parameter vector of length
/// [`dim`](TargetModel::dim).
///
/// Implementations are evaluated many times per bound evaluation and must be
/// pure.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn log_lik(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> f64;

    fn grad_log_lik(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> DVector<f64>;

    fn log_lik_and_grad(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> (f64, DVector<f64>) {
        (self.log_lik(w, hyper), self.grad_log_lik(w, hyper))
    }

    /// Log-likelihood at every column of `ws`.
    fn log_lik_batch(&self, ws: &DMatrix<f64>, hyper: &Hyperparameters) -> DVector<f64> {
        DVector::from_iterator(ws.ncols(), ws.column_iter().map(|w| self.log_lik(&w.into_owned(), hyper)))
    }

    /// Log-likelihoods and gradients (one gradient column per column of
    /// `ws`).
    fn log_lik_and_grad_batch(&self, ws: &DMatrix<f64>, hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
        let mut values = DVector::zeros(ws.ncols());
        let mut grads = DMatrix::zeros(ws.nrows(), ws.ncols());
        for (s, w) in ws.column_iter().enumerate() {
            let (v, g) = self.log_lik_and_grad(&w.into_owned(), hyper);
            values[s] = v;
            grads.set_column(s, &g);
        }
        (values, grads)
    }

    fn prior(&self) -> Prior {
        Prior::Gaussian
    }

    /// Gaussian-noise models expose their regression function so the noise
    /// precision can be updated in closed form.
    fn regressor(&self) -> Option<&dyn Regressor> {
        None
    }

    /// Suggested block structure for a factorised posterior; `None` means a
    /// dense factor.
    fn posterior_blocks(&self) -> Option<Vec<usize>> {
        None
    }

    /// `ln p(w)` including its normaliser (zero for the flat prior).
    fn log_prior(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> f64 {
        match self.prior() {
            Prior::Gaussian => {
                let m = w.len() as f64;
                0.5 * m * (hyper.alpha / (2.0 * PI)).ln() - 0.5 * hyper.alpha * w.norm_squared()
            }
            Prior::Flat => 0.0,
        }
    }

    fn grad_log_prior(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> DVector<f64> {
        match self.prior() {
            Prior::Gaussian => -w * hyper.alpha,
            Prior::Flat => DVector::zeros(w.len()),
        }
    }
}

/// Models with additional point-estimated parameters `theta` (loadings,
/// offsets, scales) that are tuned by gradient ascent on the bound.
pub trait TunableModel: TargetModel {
    fn params(&self) -> DVector<f64>;

    fn set_params(&mut self, theta: &DVector<f64>);

    /// `d log p(Y | w, theta) / d theta` at the current `theta`.
    fn grad_log_lik_params(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> DVector<f64>;

    /// Log-likelihood at an arbitrary `theta` without mutating the model.
    fn log_lik_at(&self, theta: &DVector<f64>, w: &DVector<f64>, hyper: &Hyperparameters) -> f64;

    fn grad_log_lik_params_at(
        &self,
        theta: &DVector<f64>,
        w: &DVector<f64>,
        hyper: &Hyperparameters,
    ) -> DVector<f64>;

    fn log_lik_and_grad_params_at(
        &self,
        theta: &DVector<f64>,
        w: &DVector<f64>,
        hyper: &Hyperparameters,
    ) -> (f64, DVector<f64>) {
        (self.log_lik_at(theta, w, hyper), self.grad_log_lik_params_at(theta, w, hyper))
    }
}

/// A deterministic regression function `f(X; w)` observed under Gaussian
/// noise of precision `beta`.
pub trait Regressor: Send + Sync {
    fn dim(&self) -> usize;

    fn targets(&self) -> &DVector<f64>;

    /// Model outputs `f(X; w)`, one per observation.
    fn predict(&self, w: &DVector<f64>) -> DVector<f64>;

    /// Vector-Jacobian product `(d f / d w)^T r`.
    fn vjp(&self, w: &DVector<f64>, r: &DVector<f64>) -> DVector<f64>;

    fn n_obs(&self) -> usize {
        self.targets().len()
    }

    fn residuals(&self, w: &DVector<f64>) -> DVector<f64> {
        self.targets() - self.predict(w)
    }

    /// Outputs for every column of `ws`, one column per parameter vector.
    fn predict_batch(&self, ws: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_obs(), ws.ncols());
        for (s, w) in ws.column_iter().enumerate() {
            out.set_column(s, &self.predict(&w.into_owned()));
        }
        out
    }

    /// Column-wise [`vjp`](Regressor::vjp).
    fn vjp_batch(&self, ws: &DMatrix<f64>, rs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(ws.nrows(), ws.ncols());
        for (s, w) in ws.column_iter().enumerate() {
            out.set_column(s, &self.vjp(&w.into_owned(), &rs.column(s).into_owned()));
        }
        out
    }
}

/// `prod_n N(y_n | f(x_n; w), beta^-1)` for any [`Regressor`].
#[derive(Debug, Clone)]
pub struct GaussianNoise<R> {
    regressor: R,
    prior: Prior,
}

impl<R: Regressor> GaussianNoise<R> {
    pub fn new(regressor: R, prior: Prior) -> Self {
        GaussianNoise { regressor, prior }
    }

    pub fn inner(&self) -> &R {
        &self.regressor
    }

    fn batch_residuals(&self, ws: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = -self.regressor.predict_batch(ws);
        for mut col in r.column_iter_mut() {
            col += self.regressor.targets();
        }
        r
    }

    fn beta(hyper: &Hyperparameters) -> f64 {
        hyper
            .beta
            .expect("Gaussian-noise likelihood evaluated without a noise precision")
    }
}

impl<R: Regressor> TargetModel for GaussianNoise<R> {
    fn dim(&self) -> usize {
        self.regressor.dim()
    }

    fn log_lik(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> f64 {
        let beta = Self::beta(hyper);
        let n = self.regressor.n_obs() as f64;
        let r = self.regressor.residuals(w);
        0.5 * n * (beta.ln() - (2.0 * PI).ln()) - 0.5 * beta * r.norm_squared()
    }

    fn grad_log_lik(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> DVector<f64> {
        let beta = Self::beta(hyper);
        let r = self.regressor.residuals(w);
        self.regressor.vjp(w, &r) * beta
    }

    fn log_lik_and_grad(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> (f64, DVector<f64>) {
        let beta = Self::beta(hyper);
        let n = self.regressor.n_obs() as f64;
        let r = self.regressor.residuals(w);
        let value = 0.5 * n * (beta.ln() - (2.0 * PI).ln()) - 0.5 * beta * r.norm_squared();
        (value, self.regressor.vjp(w, &r) * beta)
    }

    fn log_lik_batch(&self, ws: &DMatrix<f64>, hyper: &Hyperparameters) -> DVector<f64> {
        let beta = Self::beta(hyper);
        let n = self.regressor.n_obs() as f64;
        let r = self.batch_residuals(ws);
        let c = 0.5 * n * (beta.ln() - (2.0 * PI).ln());
        DVector::from_iterator(ws.ncols(), r.column_iter().map(|col| c - 0.5 * beta * col.norm_squared()))
    }

    fn log_lik_and_grad_batch(&self, ws: &DMatrix<f64>, hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
        let beta = Self::beta(hyper);
        let n = self.regressor.n_obs() as f64;
        let r = self.batch_residuals(ws);
        let c = 0.5 * n * (beta.ln() - (2.0 * PI).ln());
        let values = DVector::from_iterator(ws.ncols(), r.column_iter().map(|col| c - 0.5 * beta * col.norm_squared()));
        (values, self.regressor.vjp_batch(ws, &r) * beta)
    }

    fn prior(&self) -> Prior {
        self.prior
    }

    fn regressor(&self) -> Option<&dyn Regressor> {
        Some(&self.regressor)
    }
}

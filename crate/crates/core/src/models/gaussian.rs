use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Prior, TargetModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::posterior::Hyperparameters;

/// A normalised Gaussian log-density `N(w | mean, covariance)` used as a
/// flat-prior target.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if covariance.shape() != (m, m) {
            return Err(Error::dim(m, covariance.nrows(), "covariance size"));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let precision = linalg::spd_inverse(covariance).expect("checked positive definite");
        Ok(GaussianTarget {
            mean,
            precision,
            log_norm: -0.5 * (m as f64) * (2.0 * PI).ln() - 0.5 * log_det,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

impl TargetModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        let d = w - &self.mean;
        self.log_norm - 0.5 * d.dot(&(&self.precision * &d))
    }

    fn grad_log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        -(&self.precision * (w - &self.mean))
    }

    fn prior(&self) -> Prior {
        Prior::Flat
    }
}

/// A likelihood that ignores the data: `log p(Y | w) = 0`. The posterior is
/// then the prior itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroLikelihood {
    dim: usize,
    prior: Prior,
}

impl ZeroLikelihood {
    pub fn new(dim: usize) -> Self {
        ZeroLikelihood {
            dim,
            prior: Prior::Gaussian,
        }
    }

    pub fn with_prior(dim: usize, prior: Prior) -> Self {
        ZeroLikelihood { dim, prior }
    }
}

impl TargetModel for ZeroLikelihood {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_lik(&self, _w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        0.0
    }

    fn grad_log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        DVector::zeros(w.len())
    }

    fn prior(&self) -> Prior {
        self.prior
    }
}

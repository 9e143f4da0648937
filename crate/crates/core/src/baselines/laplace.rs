use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::GaussianPosteriorExact;
use crate::error::{Error, Result};
use crate::gradcheck::central_difference_jacobian;
use crate::linalg;
use crate::models::TargetModel;
use crate::posterior::{stream_rng, Hyperparameters};
use crate::scg::{scg_maximise, Objective, ScgOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceConfig {
    /// Mode searches: the given start plus `restarts - 1` perturbed starts.
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Relative finite-difference step for the Hessian.
    pub fd_step: f64,
    /// Smallest accepted eigenvalue of `-H`, relative to `max(1, largest)`.
    pub min_curvature: f64,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        LaplaceConfig {
            restarts: 10,
            max_iters: 2000,
            grad_tol: 1e-12,
            fd_step: 1e-5,
            min_curvature: 1e-6,
        }
    }
}

struct LogJoint<'a, M: ?Sized> {
    model: &'a M,
    hyper: &'a Hyperparameters,
}

impl<M: TargetModel + ?Sized> Objective for LogJoint<'_, M> {
    fn value(&self, w: &DVector<f64>) -> f64 {
        self.model.log_lik(w, self.hyper) + self.model.log_prior(w, self.hyper)
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.model.grad_log_lik(w, self.hyper) + self.model.grad_log_prior(w, self.hyper)
    }
}

/// Hessian of the log-joint by central differences of its analytic gradient,
/// symmetrised.
pub fn finite_difference_hessian<M: TargetModel + ?Sized>(
    model: &M,
    hyper: &Hyperparameters,
    w: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let obj = LogJoint { model, hyper };
    let h = central_difference_jacobian(|x| obj.gradient(x), w, step);
    (&h + h.transpose()) * 0.5
}

/// `N(mode, (-H)^-1)` at the best mode found by SCG from `start` and
/// seed-derived perturbations of it.
pub fn laplace_approximation<M: TargetModel + ?Sized>(
    model: &M,
    hyper: &Hyperparameters,
    start: &DVector<f64>,
    config: &LaplaceConfig,
    seed: u64,
) -> Result<GaussianPosteriorExact> {
    if start.len() != model.dim() {
        return Err(Error::dim(model.dim(), start.len(), "Laplace start"));
    }
    if config.restarts == 0 {
        return Err(Error::Config("Laplace needs at least one mode search".into()));
    }
    let obj = LogJoint { model, hyper };
    let opts = ScgOptions {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        ..Default::default()
    };
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut last_err = None;
    for r in 0..config.restarts {
        let x0 = if r == 0 {
            start.clone()
        } else {
            start.map(|s| {
                let e: f64 = StandardNormal.sample(&mut rng);
                s + e
            })
        };
        match scg_maximise(&obj, x0, &opts) {
            Ok(out) if out.value.is_finite() => {
                if best.as_ref().is_none_or(|(v, _)| out.value > *v) {
                    best = Some((out.value, out.x));
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let (_, mode) = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Optimizer("no mode search produced a finite value".into()))
    })?;

    let neg_h = -finite_difference_hessian(model, hyper, &mode, config.fd_step);
    if !linalg::all_finite_mat(&neg_h) {
        return Err(Error::NumericalFailure {
            iteration: 0,
            what: "non-finite Hessian at the mode".into(),
        });
    }
    let eig = SymmetricEigen::new(neg_h.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if lo <= config.min_curvature * hi.max(1.0) {
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        return Err(Error::IndefiniteHessian { eigenvalues: ev });
    }
    let cov = linalg::spd_inverse(&neg_h)
        .ok_or_else(|| Error::InvalidPosterior("negative Hessian not invertible".into()))?;
    GaussianPosteriorExact::new(mode, cov)
}

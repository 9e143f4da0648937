//! The finite-sample variational lower bound
//!
//! ```text
//! L_FS(mu, L, alpha, beta; Z) = 1/S sum_s log p(Y | mu + L z_s) - KL(q || p(w | alpha))
//! ```
//!
//! its gradients with respect to `mu` and `L`, and the closed-form
//! stationary points in `alpha` and `beta`. For flat priors the KL term is
//! replaced by the entropy of `q`.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{Prior, Regressor, TargetModel};
use crate::posterior::{Hyperparameters, SampleSet, VariationalPosterior};

/// `KL(N(mu, L L^T) || N(0, alpha^-1 I))`
/// `= 1/2 (alpha (|L|_F^2 + |mu|^2) - M - M ln alpha - 2 ln |det L|)`.
pub fn kl_gaussian_prior(post: &VariationalPosterior, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    let (log_det, _) = post.log_abs_det_l()?;
    let m = post.dim() as f64;
    let trace = linalg::frobenius_sq(post.l()) + post.mu().norm_squared();
    Ok(0.5 * (alpha * trace - m - m * alpha.ln() - 2.0 * log_det))
}

/// Differential entropy of `q`: `M/2 ln(2 pi e) + ln |det L|`.
pub fn entropy(post: &VariationalPosterior) -> Result<f64> {
    let (log_det, _) = post.log_abs_det_l()?;
    Ok(0.5 * post.dim() as f64 * (2.0 * PI * E).ln() + log_det)
}

/// Bound value together with the requested gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEval {
    pub value: f64,
    pub expected_log_lik: f64,
    pub grad_mu: Option<DVector<f64>>,
    pub grad_l: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Want {
    pub mu: bool,
    pub l: bool,
}

fn check<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
) -> Result<()> {
    if model.dim() != post.dim() {
        return Err(Error::dim(model.dim(), post.dim(), "model vs posterior dimension"));
    }
    if samples.dim() != post.dim() {
        return Err(Error::dim(post.dim(), samples.dim(), "sample vs posterior dimension"));
    }
    if model.regressor().is_some() && hyper.beta.is_none() {
        return Err(Error::Config("Gaussian-noise model requires a noise precision".into()));
    }
    Ok(())
}

pub(crate) fn evaluate<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
    want: Want,
) -> Result<BoundEval> {
    check(model, post, hyper, samples)?;
    let m = post.dim();
    let s = samples.len() as f64;
    let need_grad = want.mu || want.l;

    let zs = samples.matrix();
    let ws = post.transform_batch(zs);
    let mut g_mu = DVector::zeros(0);
    let mut g_l = DMatrix::zeros(0, 0);
    let mut ell = if need_grad {
        let (values, g) = model.log_lik_and_grad_batch(&ws, hyper);
        if want.l {
            g_l = DMatrix::zeros(m, m);
            for (start, size) in post.block_ranges() {
                g_l.view_mut((start, start), (size, size)).gemm(
                    1.0,
                    &g.rows(start, size),
                    &zs.rows(start, size).transpose(),
                    0.0,
                );
            }
        }
        if want.mu {
            g_mu = g.column_sum();
        }
        values.sum()
    } else {
        model.log_lik_batch(&ws, hyper).sum()
    };
    ell /= s;

    let (log_det, _) = post.log_abs_det_l()?;
    let md = m as f64;
    let prior = model.prior();
    let regulariser = match prior {
        Prior::Gaussian => {
            let a = hyper.alpha;
            let trace = linalg::frobenius_sq(post.l()) + post.mu().norm_squared();
            -0.5 * (a * trace - md - md * a.ln() - 2.0 * log_det)
        }
        Prior::Flat => 0.5 * md * (2.0 * PI * E).ln() + log_det,
    };

    let grad_mu = want.mu.then(|| {
        let mut g = g_mu / s;
        if prior == Prior::Gaussian {
            g.axpy(-hyper.alpha, post.mu(), 1.0);
        }
        g
    });
    let grad_l = want.l.then(|| {
        let mut g = g_l / s + post.pinv_l_transpose();
        if prior == Prior::Gaussian {
            // -alpha L is zero off the blocks already
            g -= post.l() * hyper.alpha;
        }
        g
    });

    Ok(BoundEval {
        value: ell + regulariser,
        expected_log_lik: ell,
        grad_mu,
        grad_l,
    })
}

/// `L_FS` at the given posterior, hyperparameters and latent draws.
pub fn lower_bound_fs<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
) -> Result<f64> {
    Ok(evaluate(model, post, hyper, samples, Want::default())?.value)
}

/// `dL_FS/dmu = 1/S sum_s grad log p(Y | w_s) - alpha mu`.
pub fn grad_mu<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
) -> Result<DVector<f64>> {
    let e = evaluate(model, post, hyper, samples, Want { mu: true, l: false })?;
    Ok(e.grad_mu.expect("requested"))
}

/// `dL_FS/dL = 1/S sum_s grad log p(Y | w_s) z_s^T - alpha L + (L^+)^T`,
/// restricted to the posterior's block structure.
pub fn grad_l<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
) -> Result<DMatrix<f64>> {
    let e = evaluate(model, post, hyper, samples, Want { mu: false, l: true })?;
    Ok(e.grad_l.expect("requested"))
}

/// Value and both gradients in one pass over the samples.
pub fn bound_with_gradients<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
) -> Result<BoundEval> {
    evaluate(model, post, hyper, samples, Want { mu: true, l: true })
}

/// Stationary prior precision `alpha = M / (mu^T mu + tr(L L^T))`.
///
/// With a block-diagonal (factorised) posterior sharing one `alpha` across
/// blocks this is `K M_k / sum_k (mu_k^T mu_k + tr(L_k L_k^T))`, the same
/// expression over the stacked parameters.
pub fn update_alpha(post: &VariationalPosterior) -> Result<f64> {
    let denom = post.mu().norm_squared() + linalg::frobenius_sq(post.l());
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegeneratePosterior(format!(
            "mu^T mu + tr(L L^T) = {denom}, cannot update alpha"
        )));
    }
    Ok(post.dim() as f64 / denom)
}

/// Sum over draws of the squared residual norms `|Y - f(X; mu + L z_s)|^2`.
pub fn summed_squared_residuals(
    regressor: &dyn Regressor,
    post: &VariationalPosterior,
    samples: &SampleSet,
) -> Result<f64> {
    if regressor.dim() != post.dim() {
        return Err(Error::dim(regressor.dim(), post.dim(), "regressor vs posterior dimension"));
    }
    if samples.dim() != post.dim() {
        return Err(Error::dim(post.dim(), samples.dim(), "sample vs posterior dimension"));
    }
    Ok(samples
        .iter()
        .map(|z| regressor.residuals(&post.transform(z)).norm_squared())
        .sum())
}

/// Stationary noise precision `beta = S N / sum_s |Y - f(X; mu + L z_s)|^2`.
pub fn update_beta(
    regressor: &dyn Regressor,
    post: &VariationalPosterior,
    samples: &SampleSet,
) -> Result<f64> {
    let total = summed_squared_residuals(regressor, post, samples)?;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateFit(format!(
            "summed squared residuals = {total}; noise precision would be infinite"
        )));
    }
    Ok((samples.len() * regressor.n_obs()) as f64 / total)
}

/// Analytic `dL_FS/dalpha = -1/2 (mu^T mu + tr(L L^T) - M / alpha)`.
pub fn d_bound_d_alpha(post: &VariationalPosterior, alpha: f64) -> f64 {
    let trace = linalg::frobenius_sq(post.l()) + post.mu().norm_squared();
    -0.5 * (trace - post.dim() as f64 / alpha)
}

/// Analytic `dL_FS/dbeta = N / (2 beta) - 1/(2S) sum_s |r_s|^2`.
pub fn d_bound_d_beta(
    regressor: &dyn Regressor,
    post: &VariationalPosterior,
    beta: f64,
    samples: &SampleSet,
) -> Result<f64> {
    let total = summed_squared_residuals(regressor, post, samples)?;
    let n = regressor.n_obs() as f64;
    Ok(0.5 * n / beta - 0.5 * total / samples.len() as f64)
}

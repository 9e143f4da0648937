//! Central-difference gradient checks.

use nalgebra::DVector;

use crate::bound::{bound_with_gradients, lower_bound_fs};
use crate::error::Result;
use crate::models::TargetModel;
use crate::posterior::{pack_blocks, Hyperparameters, SampleSet, VariationalPosterior};

/// Step used for coordinate `i`: `h (1 + |x_i|)`.
fn step(h: f64, xi: f64) -> f64 {
    h * (1.0 + xi.abs())
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let hi = step(h, x[i]);
        xp[i] = x[i] + hi;
        let up = f(&xp);
        xp[i] = x[i] - hi;
        let down = f(&xp);
        xp[i] = x[i];
        g[i] = (up - down) / (2.0 * hi);
    }
    g
}

/// Central-difference Jacobian-free check of a vector-valued gradient:
/// column `i` holds `(g(x + h e_i) - g(x - h e_i)) / 2h`.
pub fn central_difference_jacobian<G>(g: G, x: &DVector<f64>, h: f64) -> nalgebra::DMatrix<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut out = nalgebra::DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for i in 0..n {
        let hi = step(h, x[i]);
        xp[i] = x[i] + hi;
        let up = g(&xp);
        xp[i] = x[i] - hi;
        let down = g(&xp);
        xp[i] = x[i];
        out.set_column(i, &((up - down) / (2.0 * hi)));
    }
    out
}

/// `|a - b|_inf / max(|b|_inf, tiny)`.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error: length mismatch");
    let scale = b.amax().max(1e-300);
    (a - b).amax() / scale
}

/// Relative errors of the analytic mean and factor gradients of the bound
/// against central differences of the bound value. The factor is perturbed
/// through its packed free entries only.
pub fn bound_gradient_errors<M: TargetModel + ?Sized>(
    model: &M,
    post: &VariationalPosterior,
    hyper: &Hyperparameters,
    samples: &SampleSet,
    h: f64,
) -> Result<(f64, f64)> {
    let eval = bound_with_gradients(model, post, hyper, samples)?;
    let at_mu = |mu: &DVector<f64>| {
        let mut p = post.clone();
        p.set_mu(mu.clone()).expect("same length");
        lower_bound_fs(model, &p, hyper, samples).unwrap_or(f64::NAN)
    };
    let at_l = |packed: &DVector<f64>| {
        let mut p = post.clone();
        let l = p.unpack_l(packed).expect("same length");
        p.set_l(l).expect("same pattern");
        lower_bound_fs(model, &p, hyper, samples).unwrap_or(f64::NAN)
    };
    let fd_mu = central_difference(at_mu, post.mu(), h);
    let fd_l = central_difference(at_l, &post.pack_l(), h);
    let g_mu = eval.grad_mu.expect("requested");
    let g_l = pack_blocks(&eval.grad_l.expect("requested"), post.blocks());
    Ok((relative_error(&g_mu, &fd_mu), relative_error(&g_l, &fd_l)))
}

/// Relative error of a model's analytic log-likelihood gradient.
pub fn log_lik_gradient_error<M: TargetModel + ?Sized>(
    model: &M,
    w: &DVector<f64>,
    hyper: &Hyperparameters,
    h: f64,
) -> f64 {
    let fd = central_difference(|x| model.log_lik(x, hyper), w, h);
    relative_error(&model.grad_log_lik(w, hyper), &fd)
}

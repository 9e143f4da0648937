use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{TargetModel, TunableModel};
use crate::error::{Error, Result};
use crate::posterior::Hyperparameters;

/// Point-estimated parameters of the Cauchy-noise PPCA model
/// `y = W x + xi + eps`, with `eps` i.i.d. Cauchy(0, gamma) per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPpcaParams {
    pub loading: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub scale: f64,
}

impl CauchyPpcaParams {
    pub fn new(loading: DMatrix<f64>, offset: DVector<f64>, scale: f64) -> Result<Self> {
        let (d, q) = loading.shape();
        if offset.len() != d {
            return Err(Error::dim(d, offset.len(), "offset length vs loading rows"));
        }
        if q >= d {
            return Err(Error::Config(format!("latent dimension {q} must be below data dimension {d}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("Cauchy scale must be positive, got {scale}")));
        }
        Ok(CauchyPpcaParams {
            loading,
            offset,
            scale,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.loading.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.loading.ncols()
    }

    /// `[vec(W) row-major, xi, ln gamma]`.
    pub fn pack(&self) -> DVector<f64> {
        let (d, q) = self.loading.shape();
        let mut theta = DVector::zeros(d * q + d + 1);
        for r in 0..d {
            for c in 0..q {
                theta[r * q + c] = self.loading[(r, c)];
            }
        }
        theta.rows_mut(d * q, d).copy_from(&self.offset);
        theta[d * q + d] = self.scale.ln();
        theta
    }

    pub fn unpack(theta: &DVector<f64>, d: usize, q: usize) -> Self {
        let loading = DMatrix::from_row_slice(d, q, &theta.as_slice()[..d * q]);
        let offset = theta.rows(d * q, d).into_owned();
        CauchyPpcaParams {
            loading,
            offset,
            scale: theta[d * q + d].exp(),
        }
    }
}

/// Value and gradients of the Cauchy-PPCA log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPpcaEval {
    pub value: f64,
    /// N x q, one row per datum.
    pub grad_latents: DMatrix<f64>,
    pub grad_loading: DMatrix<f64>,
    pub grad_offset: DVector<f64>,
    pub grad_scale: f64,
    /// Gradient with respect to `ln gamma`.
    pub grad_log_scale: f64,
}

/// `sum_n sum_j [-ln pi - ln gamma - ln(1 + ((y_nj - W_j x_n - xi_j) / gamma)^2)]`.
///
/// The scalar Cauchy density is applied independently to every coordinate
/// of the residual vector.
pub fn cauchy_ppca_loglik(
    latents: &DMatrix<f64>,
    params: &CauchyPpcaParams,
    data: &DMatrix<f64>,
) -> Result<CauchyPpcaEval> {
    let (n, d) = data.shape();
    let q = params.latent_dim();
    if params.data_dim() != d {
        return Err(Error::dim(d, params.data_dim(), "loading rows vs data columns"));
    }
    if latents.shape() != (n, q) {
        return Err(Error::dim(n * q, latents.len(), "latent matrix size"));
    }
    if !(params.scale > 0.0) {
        return Err(Error::Config(format!("Cauchy scale must be positive, got {}", params.scale)));
    }
    Ok(evaluate(latents, params, data, true))
}

fn residuals(latents: &DMatrix<f64>, params: &CauchyPpcaParams, data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = data - latents * params.loading.transpose();
    for (mut col, &xi) in r.column_iter_mut().zip(params.offset.iter()) {
        col.add_scalar_mut(-xi);
    }
    r
}

fn value_only(latents: &DMatrix<f64>, params: &CauchyPpcaParams, data: &DMatrix<f64>) -> f64 {
    let r = residuals(latents, params, data);
    let inv_g = 1.0 / params.scale;
    let n_el = r.len() as f64;
    -n_el * (PI.ln() + params.scale.ln()) - r.iter().map(|e| (e * inv_g).powi(2).ln_1p()).sum::<f64>()
}

fn evaluate(
    latents: &DMatrix<f64>,
    params: &CauchyPpcaParams,
    data: &DMatrix<f64>,
    with_param_grads: bool,
) -> CauchyPpcaEval {
    let r = residuals(latents, params, data);
    let g2 = params.scale * params.scale;
    let inv_g = 1.0 / params.scale;
    let n_el = r.len() as f64;
    let mut value = -n_el * (PI.ln() + params.scale.ln());
    let mut grad_log_scale = -n_el;
    // u = d/dr [-ln(1 + r^2 / g^2)] negated: 2 r / (g^2 + r^2)
    let mut u = r.clone();
    for (ue, &re) in u.iter_mut().zip(r.iter()) {
        let r2 = re * re;
        value -= (re * inv_g).powi(2).ln_1p();
        *ue = 2.0 * re / (g2 + r2);
        grad_log_scale += 2.0 * r2 / (g2 + r2);
    }
    let grad_latents = &u * &params.loading;
    let (grad_loading, grad_offset) = if with_param_grads {
        let gw = u.tr_mul(latents);
        let gx = DVector::from_iterator(u.ncols(), u.column_iter().map(|c| c.sum()));
        (gw, gx)
    } else {
        (DMatrix::zeros(0, 0), DVector::zeros(0))
    };
    CauchyPpcaEval {
        value,
        grad_latents,
        grad_loading,
        grad_offset,
        grad_scale: grad_log_scale / params.scale,
        grad_log_scale,
    }
}

/// Cauchy-PPCA as a target model over the stacked latents
/// `w = [x_1; ...; x_N]` with a standard-normal prior on every latent; the
/// loading, offset and scale are tunable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPpca {
    data: DMatrix<f64>,
    /// `data` transposed, one observation per column.
    columns: DMatrix<f64>,
    params: CauchyPpcaParams,
}

impl CauchyPpca {
    /// `data` has one observation per row.
    pub fn new(data: DMatrix<f64>, params: CauchyPpcaParams) -> Result<Self> {
        if data.ncols() != params.data_dim() {
            return Err(Error::dim(params.data_dim(), data.ncols(), "data columns vs loading rows"));
        }
        Ok(CauchyPpca {
            columns: data.transpose(),
            data,
            params,
        })
    }

    pub fn params(&self) -> &CauchyPpcaParams {
        &self.params
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n_obs(&self) -> usize {
        self.data.nrows()
    }

    fn latents(&self, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_obs(), self.params.latent_dim(), w.as_slice())
    }

    /// Reconstructions `W x_n + xi` for latent means stacked like `w`.
    pub fn reconstruct(&self, latent_means: &DVector<f64>) -> DMatrix<f64> {
        let x = self.latents(latent_means);
        let mut out = x * self.params.loading.transpose();
        for mut row in out.row_iter_mut() {
            row += self.params.offset.transpose();
        }
        out
    }

    fn unpack(&self, theta: &DVector<f64>) -> CauchyPpcaParams {
        CauchyPpcaParams::unpack(theta, self.params.data_dim(), self.params.latent_dim())
    }

    /// Column `s` of `ws` stacks `N` latent vectors of length `q`, so the
    /// storage of `ws` is a `q x (N S)` matrix of latents, observation index
    /// fastest.
    fn batch(&self, ws: &DMatrix<f64>, want_grad: bool) -> (DVector<f64>, DMatrix<f64>) {
        let (q, n, s) = (self.params.latent_dim(), self.n_obs(), ws.ncols());
        let latents = DMatrix::from_column_slice(q, n * s, ws.as_slice());
        let mut r = &self.params.loading * latents;
        let d = r.nrows();
        let g2 = self.params.scale * self.params.scale;
        let inv_g = 1.0 / self.params.scale;
        let per_sample = -((n * d) as f64) * (PI.ln() + self.params.scale.ln());
        let mut values = DVector::from_element(s, per_sample);
        for (c, mut col) in r.column_iter_mut().enumerate() {
            let y = self.columns.column(c % n);
            let mut acc = 0.0;
            for ((e, &yj), &xi) in col.iter_mut().zip(y.iter()).zip(self.params.offset.iter()) {
                let re = yj - *e - xi;
                acc += (re * inv_g).powi(2).ln_1p();
                if want_grad {
                    *e = 2.0 * re / (g2 + re * re);
                }
            }
            values[c / n] -= acc;
        }
        if !want_grad {
            return (values, DMatrix::zeros(0, 0));
        }
        let grads = self.params.loading.tr_mul(&r);
        (values, DMatrix::from_column_slice(n * q, s, grads.as_slice()))
    }

    fn pack_param_grads(eval: &CauchyPpcaEval) -> DVector<f64> {
        let (d, q) = eval.grad_loading.shape();
        let mut g = DVector::zeros(d * q + d + 1);
        for r in 0..d {
            for c in 0..q {
                g[r * q + c] = eval.grad_loading[(r, c)];
            }
        }
        g.rows_mut(d * q, d).copy_from(&eval.grad_offset);
        g[d * q + d] = eval.grad_log_scale;
        g
    }
}

impl TargetModel for CauchyPpca {
    fn dim(&self) -> usize {
        self.n_obs() * self.params.latent_dim()
    }

    fn log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        value_only(&self.latents(w), &self.params, &self.data)
    }

    fn grad_log_lik(&self, w: &DVector<f64>, hyper: &Hyperparameters) -> DVector<f64> {
        self.log_lik_and_grad(w, hyper).1
    }

    fn log_lik_and_grad(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> (f64, DVector<f64>) {
        let e = evaluate(&self.latents(w), &self.params, &self.data, false);
        let g = e.grad_latents.transpose();
        (e.value, DVector::from_column_slice(g.as_slice()))
    }

    fn log_lik_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        self.batch(ws, false).0
    }

    fn log_lik_and_grad_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
        self.batch(ws, true)
    }

    fn posterior_blocks(&self) -> Option<Vec<usize>> {
        Some(vec![self.params.latent_dim(); self.n_obs()])
    }
}

impl TunableModel for CauchyPpca {
    fn params(&self) -> DVector<f64> {
        self.params.pack()
    }

    fn set_params(&mut self, theta: &DVector<f64>) {
        self.params = self.unpack(theta);
    }

    fn grad_log_lik_params(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        Self::pack_param_grads(&evaluate(&self.latents(w), &self.params, &self.data, true))
    }

    fn log_lik_at(&self, theta: &DVector<f64>, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        value_only(&self.latents(w), &self.unpack(theta), &self.data)
    }

    fn grad_log_lik_params_at(
        &self,
        theta: &DVector<f64>,
        w: &DVector<f64>,
        _hyper: &Hyperparameters,
    ) -> DVector<f64> {
        Self::pack_param_grads(&evaluate(&self.latents(w), &self.unpack(theta), &self.data, true))
    }

    fn log_lik_and_grad_params_at(
        &self,
        theta: &DVector<f64>,
        w: &DVector<f64>,
        _hyper: &Hyperparameters,
    ) -> (f64, DVector<f64>) {
        let e = evaluate(&self.latents(w), &self.unpack(theta), &self.data, true);
        (e.value, Self::pack_param_grads(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pixel(y: f64, scale: f64) -> f64 {
        let params = CauchyPpcaParams::new(DMatrix::zeros(2, 1), DVector::zeros(2), scale).unwrap();
        let data = DMatrix::from_row_slice(1, 2, &[y, 0.0]);
        let e = cauchy_ppca_loglik(&DMatrix::zeros(1, 1), &params, &data).unwrap();
        // subtract the second (zero-residual) pixel
        e.value - (-PI.ln() - scale.ln())
    }

    #[test]
    fn mode_contribution() {
        assert!((single_pixel(0.0, 1.0) + PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn half_maximum_contribution() {
        let g: f64 = 2.5;
        let expected = -PI.ln() - g.ln() - 2f64.ln();
        assert!((single_pixel(g, g) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(CauchyPpcaParams::new(DMatrix::zeros(3, 1), DVector::zeros(3), 0.0).is_err());
        assert!(CauchyPpcaParams::new(DMatrix::zeros(2, 2), DVector::zeros(2), 1.0).is_err());
    }

    #[test]
    fn pack_round_trip() {
        let p = CauchyPpcaParams::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DVector::from_vec(vec![0.1, 0.2, 0.3]),
            1.7,
        )
        .unwrap();
        let back = CauchyPpcaParams::unpack(&p.pack(), 3, 2);
        assert_eq!(back.loading, p.loading);
        assert_eq!(back.offset, p.offset);
        assert!((back.scale - p.scale).abs() < 1e-15);
    }
}

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Closed-form maximum-likelihood PPCA: `y = W x + xi + eps`,
/// `x ~ N(0, I_q)`, `eps ~ N(0, sigma2 I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlPpca {
    pub loading: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub noise_var: f64,
}

/// Fit by the SVD of the centred data (rows are observations). `sigma2` is
/// the mean of the `d - q` discarded covariance eigenvalues.
pub fn ml_ppca_fit(data: &DMatrix<f64>, q: usize) -> Result<MlPpca> {
    let (n, d) = data.shape();
    if q == 0 || q >= d {
        return Err(Error::Config(format!("latent dimension {q} must be in 1..{d}")));
    }
    if n <= q {
        return Err(Error::Rank(format!("{n} observations cannot support {q} components")));
    }
    let offset = DVector::from_fn(d, |j, _| data.column(j).mean());
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= offset.transpose();
    }
    let total: f64 = centred.norm_squared() / n as f64;
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let eig: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2) / n as f64).collect();

    let kept: f64 = eig[..q].iter().sum();
    let tiny = 1e-12 * eig[0].max(f64::MIN_POSITIVE);
    if eig.len() < q || eig[q - 1] <= tiny {
        return Err(Error::Rank(format!("fewer than {q} positive eigenvalues")));
    }
    let mut noise_var = ((total - kept) / (d - q) as f64).max(0.0);
    if noise_var <= 1e-14 * total {
        noise_var = 0.0;
    }
    let mut loading = DMatrix::zeros(d, q);
    for (k, &i) in order.iter().take(q).enumerate() {
        let scale = (eig[k] - noise_var).max(0.0).sqrt();
        loading.set_column(k, &(v_t.row(i).transpose() * scale));
    }
    Ok(MlPpca {
        loading,
        offset,
        noise_var,
    })
}

impl MlPpca {
    pub fn latent_dim(&self) -> usize {
        self.loading.ncols()
    }

    /// Posterior-mean latents `(W^T W + sigma2 I)^-1 W^T (y - xi)`, one row
    /// per observation.
    pub fn latent_means(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.offset.len() {
            return Err(Error::dim(self.offset.len(), data.ncols(), "PPCA data dimension"));
        }
        let q = self.latent_dim();
        let m = self.loading.tr_mul(&self.loading) + DMatrix::identity(q, q) * self.noise_var;
        let chol = Cholesky::new(m).ok_or_else(|| Error::Rank("W^T W + sigma2 I is singular".into()))?;
        let mut centred = data.clone();
        for mut row in centred.row_iter_mut() {
            row -= self.offset.transpose();
        }
        // (M^-1 W^T C^T)^T
        Ok(chol.solve(&self.loading.tr_mul(&centred.transpose())).transpose())
    }

    /// Map each row to its posterior-mean latent and back.
    pub fn reconstruct(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.latent_means(data)?;
        let mut out = x * self.loading.transpose();
        for mut row in out.row_iter_mut() {
            row += self.offset.transpose();
        }
        Ok(out)
    }

    /// Total log-likelihood `sum_n ln N(y_n | xi, W W^T + sigma2 I)`.
    pub fn log_likelihood(&self, data: &DMatrix<f64>) -> Result<f64> {
        log_likelihood_with(&self.loading, &self.offset, self.noise_var, data)
    }
}

/// PPCA log-likelihood for arbitrary parameters.
pub(crate) fn log_likelihood_with(
    loading: &DMatrix<f64>,
    offset: &DVector<f64>,
    noise_var: f64,
    data: &DMatrix<f64>,
) -> Result<f64> {
    let (n, d) = data.shape();
    let cov = loading * loading.transpose() + DMatrix::identity(d, d) * noise_var;
    let chol = Cholesky::new(cov).ok_or_else(|| Error::Rank("PPCA covariance is singular".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= offset.transpose();
    }
    let sol = chol.l().solve_lower_triangular(&centred.transpose()).expect("nonsingular");
    let quad = sol.norm_squared();
    Ok(-0.5 * (n as f64) * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det) - 0.5 * quad)
}

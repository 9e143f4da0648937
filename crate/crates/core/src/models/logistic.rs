use nalgebra::{DMatrix, DVector};

use super::TargetModel;
use crate::error::{Error, Result};
use crate::posterior::Hyperparameters;

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `ln sigma(a) = -ln(1 + e^-a)`, finite for all finite `a`.
pub fn log_sigmoid(a: f64) -> f64 {
    -softplus(-a)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli likelihood `prod_n sigma(phi_n^T w)^y_n (1 - sigma(phi_n^T w))^(1 - y_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    design: DMatrix<f64>,
    labels: DVector<f64>,
}

impl LogisticRegression {
    /// Labels must be exactly 0 or 1.
    pub fn new(design: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(Error::dim(design.nrows(), labels.len(), "labels vs design rows"));
        }
        if let Some((row, y)) = labels.iter().enumerate().find(|(_, &y)| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidLabel {
                row,
                reason: format!("binary label must be 0 or 1, got {y}"),
            });
        }
        Ok(LogisticRegression { design, labels })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    fn log_lik_of_activations<'a>(&self, a: impl Iterator<Item = &'a f64>) -> f64 {
        a.zip(self.labels.iter())
            .map(|(&a, &y)| y * log_sigmoid(a) + (1.0 - y) * log_sigmoid(-a))
            .sum()
    }

    /// `p(y = 1 | phi_n, w)` for every row of `design`.
    pub fn probabilities(design: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
        (design * w).map(sigmoid)
    }
}

impl TargetModel for LogisticRegression {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        self.log_lik_of_activations((&self.design * w).iter())
    }

    fn grad_log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        let r = &self.labels - Self::probabilities(&self.design, w);
        self.design.tr_mul(&r)
    }

    fn log_lik_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        let a = &self.design * ws;
        DVector::from_iterator(ws.ncols(), a.column_iter().map(|col| self.log_lik_of_activations(col.iter())))
    }

    fn log_lik_and_grad_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
        let mut a = &self.design * ws;
        let values = DVector::from_iterator(ws.ncols(), a.column_iter().map(|col| self.log_lik_of_activations(col.iter())));
        for mut col in a.column_iter_mut() {
            for (v, &y) in col.iter_mut().zip(self.labels.iter()) {
                *v = y - sigmoid(*v);
            }
        }
        (values, self.design.tr_mul(&a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> Hyperparameters {
        Hyperparameters::alpha(1.0).unwrap()
    }

    #[test]
    fn zero_weights_give_log_half_per_datum() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.4, 1.0, 2.0, 1.0]);
        let m = LogisticRegression::new(design, DVector::from_vec(vec![1.0, 0.0, 1.0])).unwrap();
        let v = m.log_lik(&DVector::zeros(2), &hyper());
        assert!((v - 3.0 * 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn saturation_approaches_zero_monotonically() {
        let m = LogisticRegression::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0))
            .unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..10 {
            let w = DVector::from_element(1, 2f64.powi(k));
            let v = m.log_lik(&w, &hyper());
            assert!(v > prev && v <= 0.0);
            prev = v;
        }
        assert!(prev > -1e-200);
    }

    #[test]
    fn finite_at_large_activations() {
        let m = LogisticRegression::new(
            DMatrix::from_element(2, 1, 1.0),
            DVector::from_vec(vec![0.0, 1.0]),
        )
        .unwrap();
        for a in [-500.0, 500.0] {
            let v = m.log_lik(&DVector::from_element(1, a), &hyper());
            assert!(v.is_finite());
            assert!((v + 500.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_label() {
        let r = LogisticRegression::new(DMatrix::zeros(2, 1), DVector::from_vec(vec![0.0, 2.0]));
        assert!(matches!(r, Err(Error::InvalidLabel { row: 1, .. })));
    }
}

use nalgebra::{DMatrix, DVector};

use super::TargetModel;
use crate::error::{Error, Result};
use crate::posterior::Hyperparameters;

/// Log-probabilities `a_k - logsumexp(a)` for one row of logits.
pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
    logits.iter().map(|a| a - lse).collect()
}

/// Multiclass softmax regression with one weight vector per class.
///
/// Parameters are stacked class-major, `w = [w_1; ...; w_K]`, so `dim() =
/// K * M`. The natural posterior factorises over classes, which
/// [`posterior_blocks`](TargetModel::posterior_blocks) reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegression {
    design: DMatrix<f64>,
    labels: DMatrix<f64>,
}

impl SoftmaxRegression {
    /// `labels` is N x K one-hot.
    pub fn new(design: DMatrix<f64>, labels: DMatrix<f64>) -> Result<Self> {
        if design.nrows() != labels.nrows() {
            return Err(Error::dim(design.nrows(), labels.nrows(), "labels vs design rows"));
        }
        if labels.ncols() < 2 {
            return Err(Error::Config("softmax regression needs at least two classes".into()));
        }
        for (row, r) in labels.row_iter().enumerate() {
            let ones = r.iter().filter(|&&v| v == 1.0).count();
            let zeros = r.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != r.len() {
                return Err(Error::InvalidLabel {
                    row,
                    reason: "row is not one-hot".into(),
                });
            }
        }
        Ok(SoftmaxRegression { design, labels })
    }

    pub fn n_classes(&self) -> usize {
        self.labels.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// N x K logits `Phi W` for stacked weights.
    pub fn logits(design: &DMatrix<f64>, w: &DVector<f64>, classes: usize) -> DMatrix<f64> {
        let m = design.ncols();
        let weights = DMatrix::from_column_slice(m, classes, w.as_slice());
        design * weights
    }

    /// N x K class probabilities.
    pub fn probabilities(design: &DMatrix<f64>, w: &DVector<f64>, classes: usize) -> DMatrix<f64> {
        let mut logits = Self::logits(design, w, classes);
        for mut row in logits.row_iter_mut() {
            let lp = log_softmax_row(&row.iter().cloned().collect::<Vec<_>>());
            for (v, l) in row.iter_mut().zip(lp) {
                *v = l.exp();
            }
        }
        logits
    }
}

impl TargetModel for SoftmaxRegression {
    fn dim(&self) -> usize {
        self.design.ncols() * self.labels.ncols()
    }

    fn log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        let logits = Self::logits(&self.design, w, self.n_classes());
        let mut total = 0.0;
        for (n, row) in logits.row_iter().enumerate() {
            let lp = log_softmax_row(&row.iter().cloned().collect::<Vec<_>>());
            for (k, l) in lp.iter().enumerate() {
                total += self.labels[(n, k)] * l;
            }
        }
        total
    }

    fn grad_log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        let p = Self::probabilities(&self.design, w, self.n_classes());
        let g = self.design.tr_mul(&(&self.labels - p));
        DVector::from_column_slice(g.as_slice())
    }

    fn log_lik_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        self.batch(ws, false).0
    }

    fn log_lik_and_grad_batch(&self, ws: &DMatrix<f64>, _hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
        self.batch(ws, true)
    }

    fn posterior_blocks(&self) -> Option<Vec<usize>> {
        Some(vec![self.n_features(); self.n_classes()])
    }
}

impl SoftmaxRegression {
    /// Column `s` of `ws` stacks `K` weight vectors of length `M`, so the
    /// column-major storage of `ws` is an `M x (K S)` matrix of class
    /// weights, class index fastest.
    fn batch(&self, ws: &DMatrix<f64>, want_grad: bool) -> (DVector<f64>, DMatrix<f64>) {
        let (m, k, s) = (self.n_features(), self.n_classes(), ws.ncols());
        let weights = DMatrix::from_column_slice(m, k * s, ws.as_slice());
        let mut logits = &self.design * weights;
        let mut values = DVector::zeros(s);
        let mut row = vec![0.0; k];
        for si in 0..s {
            for n in 0..self.design.nrows() {
                for (c, r) in row.iter_mut().enumerate() {
                    *r = logits[(n, si * k + c)];
                }
                let lp = log_softmax_row(&row);
                for c in 0..k {
                    let y = self.labels[(n, c)];
                    values[si] += y * lp[c];
                    logits[(n, si * k + c)] = y - lp[c].exp();
                }
            }
        }
        if !want_grad {
            return (values, DMatrix::zeros(0, 0));
        }
        let g = self.design.tr_mul(&logits);
        (values, DMatrix::from_column_slice(m * k, s, g.as_slice()))
    }
}

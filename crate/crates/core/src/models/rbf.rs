use nalgebra::{DMatrix, DVector};

use super::{GaussianNoise, Prior, Regressor};
use crate::error::{Error, Result};

/// Gaussian radial basis functions plus a trailing bias column:
/// `phi(x) = [exp(-|x - c_1|^2 / 2r^2), ..., exp(-|x - c_C|^2 / 2r^2), 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfDesign {
    centres: DMatrix<f64>,
    width: f64,
}

impl RbfDesign {
    /// `centres` holds one centre per row.
    pub fn new(centres: DMatrix<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("RBF width must be positive, got {width}")));
        }
        if centres.nrows() == 0 {
            return Err(Error::Config("at least one RBF centre is required".into()));
        }
        Ok(RbfDesign { centres, width })
    }

    /// Centres taken from the first `count` rows of the training inputs
    /// (all rows when `count` is `None`).
    pub fn from_inputs(inputs: &DMatrix<f64>, count: Option<usize>, width: f64) -> Result<Self> {
        let n = count.unwrap_or(inputs.nrows()).min(inputs.nrows());
        Self::new(inputs.rows(0, n).into_owned(), width)
    }

    pub fn centres(&self) -> &DMatrix<f64> {
        &self.centres
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Number of columns of the design, i.e. centres + 1.
    pub fn n_features(&self) -> usize {
        self.centres.nrows() + 1
    }

    /// Design matrix with one row per input row.
    pub fn design(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.centres.ncols() {
            return Err(Error::dim(self.centres.ncols(), inputs.ncols(), "input dimension"));
        }
        let c = self.centres.nrows();
        let denom = 2.0 * self.width * self.width;
        Ok(DMatrix::from_fn(inputs.nrows(), c + 1, |n, m| {
            if m == c {
                1.0
            } else {
                let d2 = (inputs.row(n) - self.centres.row(m)).norm_squared();
                (-d2 / denom).exp()
            }
        }))
    }
}

/// Linear model `f(X; w) = Phi w` on a fixed design.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBasis {
    design: DMatrix<f64>,
    targets: DVector<f64>,
}

impl LinearBasis {
    pub fn new(design: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if design.nrows() != targets.len() {
            return Err(Error::dim(design.nrows(), targets.len(), "targets vs design rows"));
        }
        Ok(LinearBasis { design, targets })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }
}

impl Regressor for LinearBasis {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    fn predict(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.design * w
    }

    fn vjp(&self, _w: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        self.design.tr_mul(r)
    }

    fn predict_batch(&self, ws: &DMatrix<f64>) -> DMatrix<f64> {
        &self.design * ws
    }

    fn vjp_batch(&self, _ws: &DMatrix<f64>, rs: &DMatrix<f64>) -> DMatrix<f64> {
        self.design.tr_mul(rs)
    }
}

/// Bayesian linear regression on RBF (or any fixed) features with Gaussian
/// noise and a Gaussian prior.
pub type RbfRegression = GaussianNoise<LinearBasis>;

impl RbfRegression {
    pub fn from_design(design: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        Ok(GaussianNoise::new(LinearBasis::new(design, targets)?, Prior::Gaussian))
    }

    pub fn design(&self) -> &DMatrix<f64> {
        self.inner().design()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TargetModel;
    use crate::posterior::Hyperparameters;
    use std::f64::consts::PI;

    #[test]
    fn design_has_bias_column_and_unit_range() {
        let inputs = DMatrix::from_column_slice(4, 1, &[-3.0, 0.0, 1.5, 6.0]);
        let rbf = RbfDesign::from_inputs(&inputs, Some(3), 1.0).unwrap();
        let phi = rbf.design(&inputs).unwrap();
        assert_eq!(phi.shape(), (4, 4));
        for n in 0..4 {
            assert_eq!(phi[(n, 3)], 1.0);
            for m in 0..3 {
                assert!(phi[(n, m)] > 0.0 && phi[(n, m)] <= 1.0);
            }
        }
        assert_eq!(phi[(1, 1)], 1.0);
    }

    #[test]
    fn zero_residual_value() {
        let beta = 4.0;
        let model = RbfRegression::from_design(DMatrix::identity(3, 2), DVector::zeros(3)).unwrap();
        let hyper = Hyperparameters::new(1.0, Some(beta)).unwrap();
        let v = model.log_lik(&DVector::zeros(2), &hyper);
        let expected = 1.5 * beta.ln() - 1.5 * (2.0 * PI).ln();
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn unit_residual_value() {
        let model = RbfRegression::from_design(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let hyper = Hyperparameters::new(1.0, Some(1.0)).unwrap();
        let v = model.log_lik(&DVector::from_element(1, 2.0), &hyper);
        assert!((v - (-0.5 * (2.0 * PI).ln() - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn rejects_mismatched_targets() {
        assert!(RbfRegression::from_design(DMatrix::zeros(3, 2), DVector::zeros(2)).is_err());
        let rbf = RbfDesign::new(DMatrix::zeros(2, 2), 1.0).unwrap();
        assert!(rbf.design(&DMatrix::zeros(3, 1)).is_err());
    }
}

//! Fixtures shared by the benchmarks.

use fsvi::models::{RbfDesign, RbfRegression};
use nalgebra::{DMatrix, DVector};

/// An RBF regression problem with `n` points and `centres` basis functions
/// plus a bias.
pub fn rbf_problem(n: usize, centres: usize) -> RbfRegression {
    let x = DMatrix::from_fn(n, 1, |i, _| -5.0 + 10.0 * i as f64 / n as f64);
    let y = DVector::from_fn(n, |i, _| x[(i, 0)].sin());
    let design = RbfDesign::from_inputs(&x, Some(centres), 1.0).expect("valid design");
    RbfRegression::from_design(design.design(&x).expect("design"), y).expect("valid model")
}

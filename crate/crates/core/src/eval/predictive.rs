use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{sigmoid, Regressor, SoftmaxRegression};
use crate::posterior::{SampleSet, VariationalPosterior};

/// Per-draw predictions for a set of test inputs: one row per datum, one
/// column per output (class probabilities, or a single regression output).
pub trait Predictor {
    fn dim(&self) -> usize;

    fn outputs(&self, w: &DVector<f64>) -> DMatrix<f64>;
}

/// `Phi w` for a fixed test design.
pub struct LinearPredictor<'a> {
    pub design: &'a DMatrix<f64>,
}

impl Predictor for LinearPredictor<'_> {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn outputs(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let y = self.design * w;
        DMatrix::from_column_slice(y.len(), 1, y.as_slice())
    }
}

/// Columns `[1 - p, p]` with `p = sigmoid(Phi w)`.
pub struct LogisticPredictor<'a> {
    pub design: &'a DMatrix<f64>,
}

impl Predictor for LogisticPredictor<'_> {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn outputs(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let a = self.design * w;
        DMatrix::from_fn(a.len(), 2, |i, j| {
            if j == 1 {
                sigmoid(a[i])
            } else {
                sigmoid(-a[i])
            }
        })
    }
}

/// Softmax class probabilities.
pub struct SoftmaxPredictor<'a> {
    pub design: &'a DMatrix<f64>,
    pub classes: usize,
}

impl Predictor for SoftmaxPredictor<'_> {
    fn dim(&self) -> usize {
        self.design.ncols() * self.classes
    }

    fn outputs(&self, w: &DVector<f64>) -> DMatrix<f64> {
        SoftmaxRegression::probabilities(self.design, w, self.classes)
    }
}

/// Outputs of any regression function.
pub struct RegressorPredictor<'a>(pub &'a dyn Regressor);

impl Predictor for RegressorPredictor<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn outputs(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let y = self.0.predict(w);
        DMatrix::from_column_slice(y.len(), 1, y.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Average over `draws` posterior samples.
    MonteCarlo { draws: usize, seed: u64 },
    /// Evaluate at the posterior mean only.
    PlugIn,
}

impl PredictionMode {
    pub fn monte_carlo(seed: u64) -> Self {
        PredictionMode::MonteCarlo { draws: 200, seed }
    }
}

/// Per-datum mean and variance of the outputs over posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSummary {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub draws: usize,
}

pub fn predictive_mc<P: Predictor + ?Sized>(
    post: &VariationalPosterior,
    predictor: &P,
    mode: PredictionMode,
) -> Result<PredictiveSummary> {
    if predictor.dim() != post.dim() {
        return Err(Error::dim(post.dim(), predictor.dim(), "predictor vs posterior dimension"));
    }
    let (draws, seed) = match mode {
        PredictionMode::PlugIn => {
            let mean = predictor.outputs(post.mu());
            let variance = DMatrix::zeros(mean.nrows(), mean.ncols());
            return Ok(PredictiveSummary {
                mean,
                variance,
                draws: 1,
            });
        }
        PredictionMode::MonteCarlo { draws, seed } => (draws, seed),
    };
    if draws == 0 {
        return Err(Error::Config("predictive needs at least one draw".into()));
    }
    post.log_abs_det_l()?;
    let z = SampleSet::draw(draws, post.dim(), seed)?;
    let mut sum: Option<DMatrix<f64>> = None;
    let mut sum_sq: Option<DMatrix<f64>> = None;
    for zs in z.iter() {
        let out = predictor.outputs(&post.transform(zs));
        let sq = out.component_mul(&out);
        match (&mut sum, &mut sum_sq) {
            (Some(s), Some(q)) => {
                *s += &out;
                *q += sq;
            }
            _ => {
                sum = Some(out);
                sum_sq = Some(sq);
            }
        }
    }
    let n = draws as f64;
    let mean = sum.expect("at least one draw") / n;
    let second = sum_sq.expect("at least one draw") / n;
    let variance = (second - mean.component_mul(&mean)).map(|v| v.max(0.0));
    Ok(PredictiveSummary { mean, variance, draws })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0])
    }

    #[test]
    fn plug_in_with_zero_factor() {
        let d = design();
        let post = VariationalPosterior::new(DVector::from_vec(vec![0.3, -0.7]), DMatrix::zeros(2, 2)).unwrap();
        let s = predictive_mc(&post, &LinearPredictor { design: &d }, PredictionMode::PlugIn).unwrap();
        assert_eq!(s.mean.column(0).into_owned(), &d * post.mu());
        assert!(predictive_mc(&post, &LinearPredictor { design: &d }, PredictionMode::monte_carlo(1)).is_err());
    }

    #[test]
    fn two_class_probabilities_sum_to_one() {
        let d = design();
        let post = VariationalPosterior::new(DVector::from_vec(vec![0.3, 2.0]), DMatrix::identity(2, 2)).unwrap();
        let s = predictive_mc(&post, &LogisticPredictor { design: &d }, PredictionMode::monte_carlo(5)).unwrap();
        for row in s.mean.row_iter() {
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let d = design();
        let post = VariationalPosterior::new(DVector::from_vec(vec![0.3, 2.0]), DMatrix::identity(2, 2)).unwrap();
        let p = LogisticPredictor { design: &d };
        let a = predictive_mc(&post, &p, PredictionMode::monte_carlo(9)).unwrap();
        let b = predictive_mc(&post, &p, PredictionMode::monte_carlo(9)).unwrap();
        assert_eq!(a, b);
    }
}

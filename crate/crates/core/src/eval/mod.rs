//! Divergences, predictive distributions and scoring.

mod kld;
mod metrics;
mod predictive;

pub use kld::{gaussian_kld, kld_numerical_2d, Direction, Grid2D};
pub use metrics::{accuracy, argmax_lowest, mse, reconstruction_error};
pub use predictive::{
    predictive_mc, LinearPredictor, LogisticPredictor, Predictor, PredictionMode, PredictiveSummary,
    RegressorPredictor, SoftmaxPredictor,
};

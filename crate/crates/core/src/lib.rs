//! Gaussian variational inference with a finite-sample lower bound.
//!
//! A posterior `q(w) = N(mu, L L^T)` is fitted to any differentiable target
//! by maximising a Monte-Carlo lower bound built from a fixed set of
//! standard-normal draws `w_s = mu + L z_s`. The crate also provides the
//! target models used to exercise it, classical baselines (exact conjugate
//! regression, Laplace, PPCA), and evaluation helpers.
//!
//! ```
//! use fsvi::{fit, FitConfig, ZeroLikelihood};
//!
//! let cfg = FitConfig { holdout_samples: 0, ..FitConfig::with_samples(20) };
//! let report = fit(&ZeroLikelihood::new(2), &cfg, 1).unwrap();
//! assert!(report.final_bound().is_finite());
//! ```

pub mod baselines;
pub mod bound;
pub mod error;
pub mod eval;
pub mod fit;
pub mod gradcheck;
pub mod linalg;
pub mod models;
pub mod posterior;
pub mod scg;

pub use bound::{
    bound_with_gradients, grad_l, grad_mu, kl_gaussian_prior, lower_bound_fs, update_alpha, update_beta,
    BoundEval,
};
pub use error::{Error, Result};
pub use fit::{
    fit, fit_tunable, monitor_generalisation, FitConfig, FitReport, Init, TraceRow, Verdict,
    DEFAULT_OVERFIT_MARGIN,
};
pub use models::{GaussianNoise, Prior, Regressor, TargetModel, TunableModel, ZeroLikelihood};
pub use posterior::{Hyperparameters, SampleSet, VariationalPosterior};
pub use scg::{scg_maximise, Objective, ScgOptions, ScgOutcome};

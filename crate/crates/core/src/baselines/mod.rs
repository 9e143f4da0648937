//! Reference posteriors: exact conjugate regression, Laplace, and
//! maximum-likelihood PPCA.

mod blr;
mod laplace;
mod ppca;

pub use blr::{exact_blr_posterior, expected_bound_linear_gaussian, GaussianPosteriorExact};
pub use laplace::{finite_difference_hessian, laplace_approximation, LaplaceConfig};
pub use ppca::{ml_ppca_fit, MlPpca};

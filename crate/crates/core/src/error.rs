use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    Dimension {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical failure at iteration {iteration}: {what}")]
    NumericalFailure { iteration: usize, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid optimizer start: {0}")]
    InvalidStart(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("negative Hessian is not positive definite (eigenvalues {eigenvalues:?})")]
    IndefiniteHessian { eigenvalues: Vec<f64> },

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("grid does not cover the densities: mass(p) = {mass_p}, mass(q) = {mass_q}")]
    Coverage { mass_p: f64, mass_q: f64 },

    #[error("invalid label at row {row}: {reason}")]
    InvalidLabel { row: usize, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("reference vector has zero norm")]
    ZeroNorm,
}

impl Error {
    pub(crate) fn dim(expected: usize, found: usize, context: &'static str) -> Self {
        Error::Dimension {
            expected,
            found,
            context,
        }
    }
}

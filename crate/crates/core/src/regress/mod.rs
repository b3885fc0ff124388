//! Self-contained inference engine: design matrices with interaction terms,
//! least squares, binomial logit by Newton–Raphson, tail probabilities and
//! residual diagnostics.

mod design;
mod diagnostics;
mod logit;
mod ols;
mod result;
pub mod special;

pub use design::{build_design, DesignMatrix, DesignSpec, FieldSource, Term, INTERCEPT};
pub use diagnostics::{residual_diagnostics, Diagnostics};
pub use logit::{
    classify_accuracy, logit_fit, logit_fit_with, logit_gradient, logit_log_likelihood, predict_prob, LogitOptions,
};
pub use ols::ols_fit;
pub use result::{significance_stars, Family, FitResult, FitStats, LogitStats, OlsStats};
pub use special::{tail_probability, Distribution};

/// 97.5% standard-normal quantile used for logit confidence intervals.
pub const Z_975: f64 = 1.959_964;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("unknown field {0:?}")]
    UnknownField(String),

    #[error("duplicate or malformed term {0:?}")]
    BadTerm(String),

    #[error("no rows left after dropping {excluded} rows with absent values")]
    EmptyAfterFiltering { excluded: usize },

    #[error("non-finite value in row {row}, column {column}")]
    NonFinite { row: usize, column: String },

    #[error("need more observations than parameters (n = {n}, p = {p})")]
    InsufficientObservations { n: usize, p: usize },

    #[error("design matrix is rank deficient; implicated columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("response must be 0/1 for a logit fit")]
    NonBinaryResponse,

    #[error("perfect or quasi-perfect separation detected at iteration {iteration}: {detail}")]
    Separation { iteration: usize, detail: String },

    #[error("logit did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("expected {expected} covariates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),

    #[error("residuals are all zero")]
    DegenerateResiduals,

    #[error("operation needs a {expected:?} fit")]
    WrongFamily { expected: Family },
}

//! Debiased and cross-fitted inference for the exposure coefficient of a
//! logistic partially linear model,
//! `P(Y = 1 | A, X) = expit(beta * A + r(X))`.
//!
//! Two estimation pipelines share one doubly robust score:
//!
//! * [`hd`]: sparse parametric nuisance models fitted by calibrated
//!   l1-penalized regressions, for `p` large relative to `n`;
//! * [`dml`]: cross-fitted machine-learning nuisance models, with `r`
//!   recovered from a full-model refit.
//!
//! [`sim`] generates the benchmark designs and aggregates replicate runs.

pub mod data;
pub mod dml;
pub mod error;
pub mod hd;
pub mod learners;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod score;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the pipelines.
pub type Real = f64;
pub type Problem = optim::PenalizedProblem<Real>;
pub type Fit = optim::Solution<Real>;

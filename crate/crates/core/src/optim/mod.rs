//! Penalized convex M-estimation and scalar root finding.

mod cv;
mod loss;
mod penalized;
mod root;

pub use cv::{cv_select_lambda, default_lambda_grid, CvSelection};
pub use loss::{Link, LossKind};
pub use penalized::{solve_penalized, solve_penalized_from, PenalizedProblem, Solution};
pub use root::solve_scalar_root;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

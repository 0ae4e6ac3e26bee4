//! The calibrated high-dimensional estimator: an initial l1-logistic fit for
//! `r`, a weighted l1 regression for `m`, a preliminary root, a calibrated
//! refit of `r`, and the final estimating equation with inference.
//!
//! Each penalized stage is solved in its lasso form; the solution's
//! subgradient condition is the stage's l-infinity moment constraint, and
//! its sup-norm is recorded as a certificate.

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Dataset, FoldAssignment};
use crate::error::{Error, Result, StageExt};
use crate::optim::{
    cv_select_lambda, default_lambda_grid, solve_penalized_from, Link, LossKind, PenalizedProblem, Solution,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::rng::derive_seed;
use crate::scalar::{expit, EXP_GUARD};
use crate::score::{infer, EtaValues, InferenceOptions, InferenceResult, ScoreInputs, ROOT_TOL};
use crate::sim::{Estimate, Estimator};

/// Fixed penalty levels that bypass cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageLambdas {
    pub gamma_tilde: f64,
    pub alpha: f64,
    pub gamma_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdConfig {
    /// The CV grid runs from `lo` to `hi` times `sqrt(log p / n)`.
    pub lambda_grid_scale: (f64, f64),
    pub grid_points: usize,
    pub cv_folds: usize,
    pub link: Link,
    pub seed: u64,
    pub lambdas: Option<StageLambdas>,
    pub tol: f64,
    pub max_iter: usize,
    pub bootstrap_draws: usize,
    pub level: f64,
}

impl Default for HdConfig {
    fn default() -> Self {
        HdConfig {
            lambda_grid_scale: (0.2, 2.0),
            grid_points: 20,
            cv_folds: 5,
            link: Link::Identity,
            seed: 0,
            lambdas: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            bootstrap_draws: 500,
            level: 0.95,
        }
    }
}

impl HdConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lambda_grid_scale;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda grid scale ({lo}, {hi}) must be positive and ordered")));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidArgument("lambda grid needs at least one point".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
        }
        if let Some(l) = self.lambdas {
            if [l.gamma_tilde, l.alpha, l.gamma_hat].iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidArgument("fixed lambdas must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn inference(&self) -> InferenceOptions {
        InferenceOptions { bootstrap_draws: self.bootstrap_draws, level: self.level, seed: derive_seed(self.seed, 1) }
    }
}

/// Diagnostics of one penalized stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub lambda: f64,
    /// Grid position of `lambda`, absent when it was fixed.
    pub cv_index: Option<usize>,
    pub kkt_residual: f64,
    /// Sup-norm of the loss gradient over penalized coordinates.
    pub moment_sup: f64,
    pub iterations: usize,
    pub guard_hits: usize,
    pub skipped_folds: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StageFit {
    pub coef: Array1<f64>,
    pub report: StageReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HdFit {
    /// Coefficient vectors over `(intercept, X_1, .., X_p)`.
    pub gamma_tilde: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    /// Exposure coefficient of the initial logistic fit.
    pub beta_init: f64,
    pub beta_tilde: f64,
    pub beta_hat: f64,
    /// Estimating-equation value at `beta_hat`.
    pub equation_residual: f64,
    pub stages: HdStages,
    pub fold_seed: u64,
    pub inference: InferenceResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HdStages {
    pub gamma_tilde: StageReport,
    pub alpha: StageReport,
    pub gamma_hat: StageReport,
}

fn lin(x: &Array2<f64>, coef: &[f64]) -> Array1<f64> {
    x.dot(&ArrayView1::from(coef))
}

fn require_intercept(d: &Dataset) -> Result<()> {
    if d.has_intercept {
        Ok(())
    } else {
        Err(Error::InvalidArgument("stage functions need a dataset with an intercept column".into()))
    }
}

/// Shared CV folds and grid for one fit.
pub struct StageContext<'a> {
    pub cfg: &'a HdConfig,
    pub folds: FoldAssignment,
    pub grid: Vec<f64>,
}

impl<'a> StageContext<'a> {
    pub fn new(d: &Dataset, cfg: &'a HdConfig) -> Result<Self> {
        cfg.validate()?;
        require_intercept(d)?;
        let (lo, hi) = cfg.lambda_grid_scale;
        Ok(StageContext {
            cfg,
            folds: make_folds(d.n(), cfg.cv_folds, derive_seed(cfg.seed, 0))?,
            grid: default_lambda_grid(d.n(), d.p(), lo, hi, cfg.grid_points),
        })
    }

    fn solve(&self, template: PenalizedProblem<f64>, fixed: Option<f64>) -> Result<StageFit> {
        let cfg = self.cfg;
        let (lambda, cv_index, skipped) = match fixed {
            Some(l) => (l, None, vec![]),
            None => {
                let sel = cv_select_lambda(&template, &self.grid, &self.folds, None, cfg.tol, cfg.max_iter)?;
                (sel.lambda, Some(sel.index), sel.skipped_folds)
            }
        };
        let prob = PenalizedProblem { lambda, ..template };
        let sol: Solution<f64> = solve_penalized_from(&prob, None, cfg.tol, cfg.max_iter)?;
        if !sol.converged {
            return Err(Error::NotConverged { iterations: sol.iterations, kkt_residual: sol.kkt_residual });
        }
        let report = StageReport {
            lambda,
            cv_index,
            kkt_residual: sol.kkt_residual,
            moment_sup: sol.penalized_moment_sup(&prob.penalty_mask),
            iterations: sol.iterations,
            guard_hits: sol.guard_hits,
            skipped_folds: skipped,
        };
        Ok(StageFit { coef: sol.coef, report })
    }
}

/// l1-logistic regression of `Y` on `(A, X)` with `A` and the intercept
/// unpenalized. Returns the `X` coefficients and the `A` coefficient.
pub fn fit_initial_gamma(d: &Dataset, ctx: &StageContext<'_>) -> Result<(StageFit, f64)> {
    require_intercept(d)?;
    let n = d.n();
    let mut design = Array2::zeros((n, d.x.ncols() + 1));
    design.column_mut(0).assign(&d.a);
    design.slice_mut(s![.., 1..]).assign(&d.x);
    let template = PenalizedProblem::new(LossKind::Logistic, design, d.y.clone(), 0.0).unpenalized(0).unpenalized(1);
    let mut fit = ctx.solve(template, ctx.cfg.lambdas.map(|l| l.gamma_tilde))?;
    let beta_init = fit.coef[0];
    fit.coef = fit.coef.slice(s![1..]).to_owned();
    Ok((fit, beta_init))
}

/// `psi_hat = expit(-X gamma_tilde)`.
pub fn psi_hat(d: &Dataset, gamma_tilde: &[f64]) -> Array1<f64> {
    lin(&d.x, gamma_tilde).mapv(|v| expit(-v))
}

/// Weighted link-integral lasso of `A` on `X` with weights
/// `(1 - Y) psi_hat e^{X gamma_tilde}`.
pub fn fit_alpha(d: &Dataset, gamma_tilde: &[f64], ctx: &StageContext<'_>) -> Result<StageFit> {
    require_intercept(d)?;
    let weights: Array1<f64> =
        lin(&d.x, gamma_tilde).iter().zip(&d.y).map(|(&u, &y)| (1.0 - y) * expit(u)).collect();
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidData("no controls: every alpha weight is zero".into()));
    }
    let template = PenalizedProblem::new(LossKind::LinkIntegral(ctx.cfg.link), d.x.clone(), d.a.clone(), 0.0)
        .with_weights(weights)
        .unpenalized(0);
    ctx.solve(template, ctx.cfg.lambdas.map(|l| l.alpha))
}

fn eta_values(d: &Dataset, r: &Array1<f64>, alpha: &[f64], link: Link, psi: &Array1<f64>) -> EtaValues<f64> {
    EtaValues { r: r.to_vec(), m: lin(&d.x, alpha).mapv(|u| link.apply(u)).to_vec(), psi: psi.to_vec() }
}

/// Root of `n^-1 sum psi_hat {Y e^{-beta A} - (1 - Y) e^{X gamma_tilde}} {A - g(X alpha)}`.
pub fn fit_beta_preliminary(d: &Dataset, gamma_tilde: &[f64], alpha: &[f64], link: Link, init: f64) -> Result<f64> {
    require_intercept(d)?;
    let eta = eta_values(d, &lin(&d.x, gamma_tilde), alpha, link, &psi_hat(d, gamma_tilde));
    ScoreInputs::from_dataset(d, &eta, None).solve_beta(init, ROOT_TOL)
}

/// Calibration-exponential lasso with weights `psi_hat e^{X gamma_tilde} g'(X alpha)`
/// and offset `beta_tilde A`.
pub fn fit_gamma_calibrated(
    d: &Dataset,
    gamma_tilde: &[f64],
    alpha: &[f64],
    beta_tilde: f64,
    ctx: &StageContext<'_>,
) -> Result<StageFit> {
    require_intercept(d)?;
    let link = ctx.cfg.link;
    let weights: Array1<f64> = lin(&d.x, gamma_tilde)
        .iter()
        .zip(lin(&d.x, alpha).iter())
        .map(|(&u, &v)| expit(u) * link.derivative(v))
        .collect();
    let template = PenalizedProblem::new(LossKind::CalibrationExponential, d.x.clone(), d.y.clone(), 0.0)
        .with_weights(weights)
        .with_offset(&d.a * beta_tilde)
        .unpenalized(0);
    let fit = ctx.solve(template, ctx.cfg.lambdas.map(|l| l.gamma_hat))?;
    if fit.report.guard_hits as f64 > 0.01 * d.n() as f64 {
        return Err(Error::Pathological(format!(
            "exponent guard saturated on {} of {} samples",
            fit.report.guard_hits,
            d.n()
        )));
    }
    Ok(fit)
}

/// Runs every stage and solves the final weighted estimating equation.
/// A dataset without an intercept column gets one prepended.
pub fn fit_hd(d: &Dataset, cfg: &HdConfig) -> Result<HdFit> {
    let d = d.with_intercept();
    let ctx = StageContext::new(&d, cfg)?;
    let (gt, beta_init) = fit_initial_gamma(&d, &ctx).stage("initial gamma")?;
    let gamma_tilde = gt.coef.to_vec();
    let al = fit_alpha(&d, &gamma_tilde, &ctx).stage("alpha")?;
    let alpha = al.coef.to_vec();
    let beta_tilde =
        fit_beta_preliminary(&d, &gamma_tilde, &alpha, cfg.link, beta_init).stage("preliminary beta")?;
    let gh = fit_gamma_calibrated(&d, &gamma_tilde, &alpha, beta_tilde, &ctx).stage("calibrated gamma")?;
    let gamma_hat = gh.coef.to_vec();

    let (beta_hat, equation_residual, inference) = (|| {
        let xg_tilde = lin(&d.x, &gamma_tilde);
        let xg_hat = lin(&d.x, &gamma_hat);
        let weight: Vec<f64> = xg_tilde
            .iter()
            .zip(&xg_hat)
            .map(|(&t, &h)| {
                let u = t - h;
                if u > EXP_GUARD {
                    Err(Error::Pathological(format!("calibration weight exponent {u} exceeds the guard")))
                } else {
                    Ok(u.exp())
                }
            })
            .collect::<Result<_>>()?;
        let eta = eta_values(&d, &xg_hat, &alpha, cfg.link, &psi_hat(&d, &gamma_tilde));
        let inputs = ScoreInputs::from_dataset(&d, &eta, Some(&weight));
        let beta_hat = inputs.solve_beta(beta_tilde, ROOT_TOL)?;
        let residual = inputs.value(beta_hat)?;
        let inference = infer(&inputs, beta_hat, &cfg.inference())?;
        Ok((beta_hat, residual, inference))
    })()
    .stage("final beta")?;

    Ok(HdFit {
        gamma_tilde,
        alpha_hat: alpha,
        gamma_hat,
        beta_init,
        beta_tilde,
        beta_hat,
        equation_residual,
        stages: HdStages { gamma_tilde: gt.report, alpha: al.report, gamma_hat: gh.report },
        fold_seed: derive_seed(cfg.seed, 0),
        inference,
    })
}

impl HdFit {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            beta_hat: self.beta_hat,
            se: self.inference.se,
            ci_low: self.inference.ci_low,
            ci_high: self.inference.ci_high,
        }
    }
}

impl Estimator for HdConfig {
    fn name(&self) -> String {
        "hd".into()
    }

    fn estimate(&self, data: &Dataset, seed: u64) -> Result<Estimate> {
        let cfg = HdConfig { seed, ..self.clone() };
        Ok(fit_hd(data, &cfg)?.estimate())
    }
}

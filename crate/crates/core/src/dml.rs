//! Cross-fitted estimation with machine-learning nuisance models.
//!
//! For each outer fold `k`, nuisances are learned on the other folds:
//! `m` by regressing `A` on `X` among controls, and `r` by full model
//! refitting. The full model `P(Y = 1 | A, X)` and `E[A | X]` are learned
//! on inner splits, the slope of `logit M` on the exposure residual gives a
//! preliminary `beta`, and `r` is recovered either as
//! `E[logit M | X] - beta E[A | X]` (difference) or as
//! `log(E[Y e^{-beta A} | X] / P(Y = 0 | X))` (ratio). The score is then
//! solved with every row's nuisances coming from the model that did not
//! see it.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Dataset, FoldAssignment};
use crate::error::{Error, Result, StageExt};
use crate::learners::{fit_learner, select_best, LearnerModel, LearnerSpec, Objective};
use crate::rng::derive_seed;
use crate::scalar::{expit, logit};
use crate::score::{infer, EtaValues, InferenceOptions, InferenceResult, NuisanceSet, ScoreInputs, ROOT_TOL};
use crate::sim::{Estimate, Estimator};

/// A fixed learner, or a candidate list resolved by cross-validated
/// squared error on each training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearnerChoice {
    One(LearnerSpec),
    Best(Vec<LearnerSpec>),
}

impl LearnerChoice {
    fn validate(&self) -> Result<()> {
        match self {
            LearnerChoice::One(s) => s.validate(),
            LearnerChoice::Best(v) if v.len() < 2 => {
                Err(Error::InvalidArgument("a learner candidate list needs at least 2 entries".into()))
            }
            LearnerChoice::Best(v) => v.iter().try_for_each(LearnerSpec::validate),
        }
    }
}

impl From<LearnerSpec> for LearnerChoice {
    fn from(s: LearnerSpec) -> Self {
        LearnerChoice::One(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RVariant {
    #[default]
    Difference,
    Ratio,
}

impl std::str::FromStr for RVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" => Ok(RVariant::Difference),
            "ratio" => Ok(RVariant::Ratio),
            _ => Err(Error::InvalidArgument(format!("unknown r variant `{s}`"))),
        }
    }
}

/// The nuisance regressions. Objectives are fixed by the role: `Full` and
/// `RatioDen` are fitted as probabilities, the rest as squared-error means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// `A` on `X` among controls.
    M,
    /// `Y` on `(A, X)`.
    Full,
    /// `A` on `X`.
    A,
    /// Pseudo-outcome `logit M(A, X)` on `X`.
    T,
    /// `Y e^{-beta A}` on `X`.
    RatioNum,
    /// `1 - Y` on `X`.
    RatioDen,
}

impl Role {
    pub fn objective(self) -> Objective {
        match self {
            Role::Full | Role::RatioDen => Objective::Logistic,
            _ => Objective::Squared,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmlConfig {
    pub k_outer: usize,
    pub k_inner: usize,
    pub learner_m: LearnerChoice,
    pub learner_full: LearnerChoice,
    pub learner_a: LearnerChoice,
    /// Also used for both regressions of the ratio variant.
    pub learner_t: LearnerChoice,
    pub r_variant: RVariant,
    pub seed: u64,
    pub bootstrap_draws: usize,
    pub level: f64,
}

impl Default for DmlConfig {
    fn default() -> Self {
        DmlConfig::with_learner(LearnerSpec::boosted_trees())
    }
}

impl DmlConfig {
    /// The same learner for every nuisance.
    pub fn with_learner(spec: LearnerSpec) -> Self {
        DmlConfig::with_choice(LearnerChoice::One(spec))
    }

    pub fn with_choice(choice: LearnerChoice) -> Self {
        DmlConfig {
            k_outer: 5,
            k_inner: 5,
            learner_m: choice.clone(),
            learner_full: choice.clone(),
            learner_a: choice.clone(),
            learner_t: choice,
            r_variant: RVariant::Difference,
            seed: 0,
            bootstrap_draws: 500,
            level: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_outer < 2 || self.k_inner < 2 {
            return Err(Error::InvalidArgument(format!(
                "k_outer = {} and k_inner = {} must both be at least 2",
                self.k_outer, self.k_inner
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} outside (0, 1)", self.level)));
        }
        if self.bootstrap_draws != 0 && self.bootstrap_draws < 100 {
            return Err(Error::InvalidArgument("bootstrap_draws must be 0 or at least 100".into()));
        }
        for c in [&self.learner_m, &self.learner_full, &self.learner_a, &self.learner_t] {
            c.validate()?;
        }
        Ok(())
    }

    fn choice(&self, role: Role) -> &LearnerChoice {
        match role {
            Role::M => &self.learner_m,
            Role::Full => &self.learner_full,
            Role::A => &self.learner_a,
            Role::T | Role::RatioNum | Role::RatioDen => &self.learner_t,
        }
    }

    /// Short label of the learners in use, e.g. `boosted-trees`.
    pub fn label(&self) -> String {
        let name = |c: &LearnerChoice| match c {
            LearnerChoice::One(s) => s.kind().to_string(),
            LearnerChoice::Best(_) => "best".into(),
        };
        let names = [&self.learner_m, &self.learner_full, &self.learner_a, &self.learner_t].map(name);
        if names.iter().all(|n| *n == names[0]) {
            names[0].clone()
        } else {
            names.join("/")
        }
    }
}

/// A fitted nuisance regression and the learner that produced it.
#[derive(Debug, Clone)]
pub struct RoleFit {
    pub model: LearnerModel,
    pub learner: String,
}

/// Source of nuisance regressions. The configuration is one; tests plug in
/// true functions through their own implementations.
pub trait LearnerFactory: Sync {
    fn fit(&self, role: Role, c: ArrayView2<f64>, r: &[f64], seed: u64) -> Result<RoleFit>;
}

impl LearnerFactory for DmlConfig {
    fn fit(&self, role: Role, c: ArrayView2<f64>, r: &[f64], seed: u64) -> Result<RoleFit> {
        let objective = role.objective();
        let spec = match self.choice(role) {
            LearnerChoice::One(s) => s.clone(),
            LearnerChoice::Best(cands) => {
                let cands: Vec<LearnerSpec> = cands
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.clone().with_objective(objective).with_seed(derive_seed(seed, 1 + i as u64)))
                    .collect();
                let folds = make_folds(r.len(), self.k_inner.min(r.len()), derive_seed(seed, 0))?;
                select_best(&cands, c, r, &folds)?.spec
            }
        };
        let spec = spec.with_objective(objective);
        let seed = derive_seed(seed, spec.seed);
        let model = fit_learner(&spec.clone().with_seed(seed), c, r)?;
        Ok(RoleFit { model, learner: spec.kind().into() })
    }
}

fn exposure_and_covariates(d: &Dataset) -> Array2<f64> {
    let x = d.raw_x();
    let mut out = Array2::zeros((d.n(), x.ncols() + 1));
    out.column_mut(0).assign(&d.a);
    out.slice_mut(ndarray::s![.., 1..]).assign(&x);
    out
}

fn rows_of(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn role_seed(base: u64, role: Role, j: u64) -> u64 {
    derive_seed(base, 16 + role.index() * 1024 + j)
}

/// `m` regression on the controls among `train`.
pub fn fit_m_hat(
    d: &Dataset,
    train: &[usize],
    factory: &dyn LearnerFactory,
    seed: u64,
) -> Result<(RoleFit, Vec<usize>)> {
    let controls: Vec<usize> = train.iter().copied().filter(|&i| d.y[i] == 0.0).collect();
    if controls.len() < 10 {
        return Err(Error::InvalidData(format!(
            "{} controls in the training split; at least 10 are needed",
            controls.len()
        )));
    }
    let a: Vec<f64> = controls.iter().map(|&i| d.a[i]).collect();
    let fit = factory.fit(Role::M, rows_of(d.raw_x(), &controls).view(), &a, role_seed(seed, Role::M, 0))?;
    Ok((fit, controls))
}

/// Inner cross-fit of the full model and of `E[A | X]` over a training split.
#[derive(Debug, Clone)]
pub struct InnerFits {
    /// Inner fold of each training row, aligned with `train`.
    pub folds: FoldAssignment,
    pub full: Vec<RoleFit>,
    pub a: Vec<RoleFit>,
    /// `logit M(A_i, X_i)` from the model that excluded row `i`'s inner fold.
    pub pseudo_outcome: Vec<f64>,
    /// Global row indices each inner model was trained on.
    pub trained_on: Vec<Vec<usize>>,
}

/// Preliminary slope: least squares of `logit M` on `A - a(X)` through the
/// origin, each row using the inner models fitted without it.
pub fn fmr_breve_beta(
    d: &Dataset,
    train: &[usize],
    k_inner: usize,
    factory: &dyn LearnerFactory,
    seed: u64,
) -> Result<(f64, InnerFits)> {
    let folds = make_folds(train.len(), k_inner, derive_seed(seed, 0))?;
    let ax = exposure_and_covariates(d);
    let x = d.raw_x();
    let mut full = Vec::with_capacity(k_inner);
    let mut a_fits = Vec::with_capacity(k_inner);
    let mut trained_on = Vec::with_capacity(k_inner);
    let mut w = vec![0.0; train.len()];
    let mut resid = vec![0.0; train.len()];
    for j in 0..k_inner {
        let rows: Vec<usize> = folds.complement(j).into_iter().map(|t| train[t]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| d.y[i]).collect();
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::InvalidData(format!("inner training split {j} contains a single outcome class")));
        }
        let a: Vec<f64> = rows.iter().map(|&i| d.a[i]).collect();
        let m_fit = factory
            .fit(Role::Full, rows_of(ax.view(), &rows).view(), &y, role_seed(seed, Role::Full, j as u64))
            .stage(&format!("full model, inner fold {j}"))?;
        let a_fit = factory
            .fit(Role::A, rows_of(x, &rows).view(), &a, role_seed(seed, Role::A, j as u64))
            .stage(&format!("exposure mean, inner fold {j}"))?;
        for t in folds.members(j) {
            let i = train[t];
            w[t] = logit(m_fit.model.predict_row(ax.row(i)));
            resid[t] = d.a[i] - a_fit.model.predict_row(x.row(i));
        }
        full.push(m_fit);
        a_fits.push(a_fit);
        trained_on.push(rows);
    }
    let sxx: f64 = resid.iter().map(|v| v * v).sum();
    if !(sxx > 1e-12 * train.len() as f64) {
        return Err(Error::NotIdentified(sxx / train.len() as f64));
    }
    let sxy: f64 = resid.iter().zip(&w).map(|(e, w)| e * w).sum();
    Ok((sxy / sxx, InnerFits { folds, full, a: a_fits, pseudo_outcome: w, trained_on }))
}

/// Fitted `r` for one outer fold.
#[derive(Debug, Clone)]
pub enum RHat {
    /// `t(x) - beta * mean_j a_j(x)`.
    Difference { t: RoleFit, a: Vec<LearnerModel>, beta: f64 },
    /// `log(num(x) / den(x))` with both floored at [`RATIO_FLOOR`].
    Ratio { num: RoleFit, den: RoleFit },
}

pub const RATIO_FLOOR: f64 = 1e-3;

impl RHat {
    /// Value at `x` and whether a ratio term hit the floor.
    pub fn eval(&self, x: ArrayView1<f64>) -> (f64, bool) {
        match self {
            RHat::Difference { t, a, beta } => {
                let abar = a.iter().map(|m| m.predict_row(x)).sum::<f64>() / a.len() as f64;
                (t.model.predict_row(x) - beta * abar, false)
            }
            RHat::Ratio { num, den } => {
                let (n, d) = (num.model.predict_row(x), den.model.predict_row(x));
                let clipped = n < RATIO_FLOOR || d < RATIO_FLOOR;
                ((n.max(RATIO_FLOOR) / d.max(RATIO_FLOOR)).ln(), clipped)
            }
        }
    }

    pub fn learners(&self) -> (String, Option<String>) {
        match self {
            RHat::Difference { t, .. } => (t.learner.clone(), None),
            RHat::Ratio { num, den } => (num.learner.clone(), Some(den.learner.clone())),
        }
    }
}

/// Learns `r` over `train` from the preliminary slope and inner fits.
pub fn fmr_fit_r(
    d: &Dataset,
    train: &[usize],
    breve_beta: f64,
    inner: &InnerFits,
    variant: RVariant,
    factory: &dyn LearnerFactory,
    seed: u64,
) -> Result<(RHat, Vec<usize>)> {
    if !breve_beta.is_finite() {
        return Err(Error::InvalidArgument(format!("preliminary slope {breve_beta} is not finite")));
    }
    let x = rows_of(d.raw_x(), train);
    match variant {
        RVariant::Difference => {
            let t = factory.fit(Role::T, x.view(), &inner.pseudo_outcome, role_seed(seed, Role::T, 0))?;
            let a = inner.a.iter().map(|f| f.model.clone()).collect();
            Ok((RHat::Difference { t, a, beta: breve_beta }, train.to_vec()))
        }
        RVariant::Ratio => {
            let cases = train.iter().filter(|&&i| d.y[i] == 1.0).count();
            if cases < 10 {
                return Err(Error::InvalidData(format!("{cases} cases in the training split; at least 10 are needed")));
            }
            let num_target: Vec<f64> = train.iter().map(|&i| d.y[i] * (-breve_beta * d.a[i]).exp()).collect();
            let den_target: Vec<f64> = train.iter().map(|&i| 1.0 - d.y[i]).collect();
            let num = factory.fit(Role::RatioNum, x.view(), &num_target, role_seed(seed, Role::RatioNum, 0))?;
            let den = factory.fit(Role::RatioDen, x.view(), &den_target, role_seed(seed, Role::RatioDen, 0))?;
            Ok((RHat::Ratio { num, den }, train.to_vec()))
        }
    }
}

/// Training rows behind every model used for one outer fold.
#[derive(Debug, Clone, Default)]
pub struct FoldProvenance {
    pub evaluated: Vec<usize>,
    pub m: Vec<usize>,
    pub inner: Vec<Vec<usize>>,
    pub r: Vec<usize>,
}

impl FoldProvenance {
    fn training_sets(&self) -> impl Iterator<Item = (&str, &Vec<usize>)> {
        [("m", &self.m), ("r", &self.r)].into_iter().chain(self.inner.iter().map(|v| ("inner", v)))
    }
}

/// Fails if any row's nuisance values came from a model trained on it.
pub fn check_provenance(n: usize, provenance: &[FoldProvenance]) -> Result<()> {
    let mut seen = vec![false; n];
    for (k, p) in provenance.iter().enumerate() {
        let mut held = vec![false; n];
        for &i in &p.evaluated {
            if seen[i] {
                return Err(Error::Pathological(format!("row {i} is evaluated by more than one fold")));
            }
            seen[i] = true;
            held[i] = true;
        }
        for (what, rows) in p.training_sets() {
            if let Some(&i) = rows.iter().find(|&&i| held[i]) {
                return Err(Error::Pathological(format!("fold {k}: {what} model was trained on evaluated row {i}")));
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::Pathological(format!("row {i} has no nuisance values"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub breve_beta: Option<f64>,
    pub learner_m: Option<String>,
    pub learner_full: Vec<String>,
    pub learner_a: Vec<String>,
    pub learner_r: Option<String>,
    /// Evaluation rows where a ratio term was floored.
    pub ratio_floored: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DmlFit {
    pub k_outer: usize,
    pub fold_seed: u64,
    pub r_variant: RVariant,
    pub breve_betas: Vec<f64>,
    pub beta_hat: f64,
    /// Mean score at `beta_hat`.
    pub equation_residual: f64,
    pub folds: Vec<FoldReport>,
    pub inference: InferenceResult,
    #[serde(skip)]
    pub fold_assignment: FoldAssignment,
    #[serde(skip)]
    pub nuisances: Vec<NuisanceSet>,
    #[serde(skip)]
    pub eta: EtaValues<f64>,
    #[serde(skip)]
    pub provenance: Vec<FoldProvenance>,
}

impl DmlFit {
    pub fn estimate(&self) -> Estimate {
        let i = &self.inference;
        Estimate { beta_hat: self.beta_hat, se: i.se, ci_low: i.ci_low, ci_high: i.ci_high }
    }
}

struct FoldOut {
    report: FoldReport,
    set: NuisanceSet,
    values: Vec<(usize, (f64, f64, f64))>,
    provenance: FoldProvenance,
}

fn fit_fold(d: &Dataset, folds: &FoldAssignment, k: usize, cfg: &DmlConfig, factory: &dyn LearnerFactory, seed: u64) -> Result<FoldOut> {
    let train = folds.complement(k);
    let held = folds.members(k);
    let (m_fit, m_rows) = fit_m_hat(d, &train, factory, seed).stage("m")?;
    let (breve, inner) = fmr_breve_beta(d, &train, cfg.k_inner, factory, seed).stage("preliminary beta")?;
    let (r_hat, r_rows) =
        fmr_fit_r(d, &train, breve, &inner, cfg.r_variant, factory, seed).stage("r")?;
    let x = d.raw_x();
    let mut values = Vec::with_capacity(held.len());
    let mut floored = 0;
    for &i in &held {
        let (r, clipped) = r_hat.eval(x.row(i));
        floored += usize::from(clipped);
        let m = m_fit.model.predict_row(x.row(i));
        values.push((i, (r, m, expit(-r))));
    }
    if floored * 20 > held.len() {
        return Err(Error::Pathological(format!(
            "ratio terms floored at {floored} of {} evaluation rows; use the difference variant",
            held.len()
        )))
        .stage("r");
    }
    let (learner_r, _) = r_hat.learners();
    let report = FoldReport {
        fold: k,
        seed,
        train_size: train.len(),
        breve_beta: Some(breve),
        learner_m: Some(m_fit.learner.clone()),
        learner_full: inner.full.iter().map(|f| f.learner.clone()).collect(),
        learner_a: inner.a.iter().map(|f| f.learner.clone()).collect(),
        learner_r: Some(learner_r),
        ratio_floored: floored,
    };
    let m_model = m_fit.model;
    let r_shared = std::sync::Arc::new(r_hat);
    let set = NuisanceSet::new(
        std::sync::Arc::new(move |x| r_shared.eval(x).0),
        std::sync::Arc::new(move |x| m_model.predict_row(x)),
    );
    let provenance = FoldProvenance { evaluated: held, m: m_rows, inner: inner.trained_on, r: r_rows };
    Ok(FoldOut { report, set, values, provenance })
}

fn check_input(d: &Dataset, cfg: &DmlConfig) -> Result<FoldAssignment> {
    cfg.validate()?;
    d.validate()?;
    let cases = d.cases();
    if cases == 0 || cases == d.n() {
        return Err(Error::InvalidData("the response is constant; both outcome classes are required".into()));
    }
    if d.raw_x().ncols() == 0 {
        return Err(Error::InvalidData("no covariates".into()));
    }
    let folds = make_folds(d.n(), cfg.k_outer, derive_seed(cfg.seed, 0))?;
    for k in 0..cfg.k_outer {
        let train = folds.complement(k);
        if train.iter().all(|&i| d.y[i] == d.y[train[0]]) {
            return Err(Error::InvalidData(format!("outer training split {k} contains a single outcome class")));
        }
    }
    Ok(folds)
}

fn finish(
    d: &Dataset,
    cfg: &DmlConfig,
    folds: FoldAssignment,
    outs: Vec<FoldOut>,
    init: f64,
) -> Result<DmlFit> {
    let n = d.n();
    let mut eta = EtaValues { r: vec![0.0; n], m: vec![0.0; n], psi: vec![0.0; n] };
    for o in &outs {
        for &(i, (r, m, psi)) in &o.values {
            eta.r[i] = r;
            eta.m[i] = m;
            eta.psi[i] = psi;
        }
    }
    let provenance: Vec<FoldProvenance> = outs.iter().map(|o| o.provenance.clone()).collect();
    check_provenance(n, &provenance)?;
    let inputs = ScoreInputs::from_dataset(d, &eta, None);
    let beta_hat = inputs.solve_beta(init, ROOT_TOL).stage("final beta")?;
    let equation_residual = inputs.value(beta_hat)?;
    let opts = InferenceOptions { bootstrap_draws: cfg.bootstrap_draws, level: cfg.level, seed: derive_seed(cfg.seed, 1) };
    let inference = infer(&inputs, beta_hat, &opts).stage("inference")?;
    let breve_betas = outs.iter().filter_map(|o| o.report.breve_beta).collect();
    let (folds_report, nuisances) = outs.into_iter().map(|o| (o.report, o.set)).unzip();
    Ok(DmlFit {
        k_outer: cfg.k_outer,
        fold_seed: derive_seed(cfg.seed, 0),
        r_variant: cfg.r_variant,
        breve_betas,
        beta_hat,
        equation_residual,
        folds: folds_report,
        inference,
        fold_assignment: folds,
        nuisances,
        eta,
        provenance,
    })
}

/// Cross-fitted estimate with nuisances from `factory`. Outer folds run in
/// parallel; fold `k` draws its randomness from `(seed, 2 + k)`.
pub fn fit_dml_with(d: &Dataset, cfg: &DmlConfig, factory: &dyn LearnerFactory) -> Result<DmlFit> {
    let folds = check_input(d, cfg)?;
    let outs: Vec<FoldOut> = (0..cfg.k_outer)
        .into_par_iter()
        .map(|k| fit_fold(d, &folds, k, cfg, factory, derive_seed(cfg.seed, 2 + k as u64)).stage(&format!("fold {k}")))
        .collect::<Result<_>>()?;
    let init = outs.iter().filter_map(|o| o.report.breve_beta).sum::<f64>() / outs.len() as f64;
    finish(d, cfg, folds, outs, if init.is_finite() { init } else { 0.0 })
}

pub fn fit_dml(d: &Dataset, cfg: &DmlConfig) -> Result<DmlFit> {
    fit_dml_with(d, cfg, cfg)
}

/// Same folds, equation and inference, with known nuisances in every fold.
pub fn fit_dml_oracle(d: &Dataset, cfg: &DmlConfig, set: &NuisanceSet) -> Result<DmlFit> {
    let folds = check_input(d, cfg)?;
    let x = d.raw_x();
    let outs = (0..cfg.k_outer)
        .map(|k| {
            let held = folds.members(k);
            let values = held.iter().map(|&i| (i, set.evaluate_row(x.row(i)))).collect();
            FoldOut {
                report: FoldReport {
                    fold: k,
                    seed: derive_seed(cfg.seed, 2 + k as u64),
                    train_size: d.n() - held.len(),
                    breve_beta: None,
                    learner_m: None,
                    learner_full: vec![],
                    learner_a: vec![],
                    learner_r: None,
                    ratio_floored: 0,
                },
                set: set.clone(),
                values,
                provenance: FoldProvenance { evaluated: held, ..Default::default() },
            }
        })
        .collect();
    finish(d, cfg, folds, outs, 0.0)
}

impl Estimator for DmlConfig {
    fn name(&self) -> String {
        format!("dml-{}", self.label())
    }

    fn estimate(&self, data: &Dataset, seed: u64) -> Result<Estimate> {
        let cfg = DmlConfig { seed, ..self.clone() };
        Ok(fit_dml(data, &cfg)?.estimate())
    }
}

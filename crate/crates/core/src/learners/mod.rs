//! Conditional-mean learners: given covariates `C` and a response `R`,
//! estimate `E[R | C]`. Each learner is described by a serializable
//! [`LearnerSpec`] and fitted into an immutable [`LearnerModel`].
//!
//! Hyperparameter keys by `kind`:
//!
//! | kind | keys (defaults) |
//! |---|---|
//! | `boosted-trees` | `rounds` (200), `depth` (3, at most 3), `shrinkage` (0.1), `min_leaf` (10) |
//! | `random-forest` | `trees` (200), `mtry` (`floor(sqrt(p))`), `min_leaf` (5), `bootstrap` (true) |
//! | `penalized-linear` | `lambdas` (10 values from 10 down to 1e-4), `folds` (5) |
//! | `k-nearest` | `ks` ([5, 10, 20, 40]), `folds` (5) |
//!
//! Every kind also takes `objective` (`squared` or `logistic`),
//! `dropout_prob` (0) and `seed` (0).

mod boost;
mod forest;
mod knn;
mod linear;
mod tree;

pub use boost::{BoostParams, Boosted};
pub use forest::{Forest, ForestParams};
pub use knn::{Knn, KnnParams};
pub use linear::{Linear, RidgeParams};
pub use tree::{fit_tree, RegressionTree};

use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, FoldAssignment};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed};
use crate::score::RowFn;

/// Bounds applied to every logistic-objective prediction.
pub const PROB_CLIP: (f64, f64) = (1e-3, 1.0 - 1e-3);

const DROPOUT_STREAM: u64 = 0;
const TUNING_STREAM: u64 = 1;
const FIT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    Squared,
    /// Binary response; predictions are probabilities.
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerParams {
    BoostedTrees(BoostParams),
    RandomForest(ForestParams),
    PenalizedLinear(RidgeParams),
    KNearest(KnnParams),
}

impl LearnerParams {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnerParams::BoostedTrees(_) => "boosted-trees",
            LearnerParams::RandomForest(_) => "random-forest",
            LearnerParams::PenalizedLinear(_) => "penalized-linear",
            LearnerParams::KNearest(_) => "k-nearest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub params: LearnerParams,
    #[serde(default)]
    pub objective: Objective,
    /// Each training covariate entry is replaced by a standard normal draw
    /// with this probability.
    #[serde(default)]
    pub dropout_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(params: LearnerParams) -> Self {
        LearnerSpec { params, objective: Objective::Squared, dropout_prob: 0.0, seed: 0 }
    }

    pub fn boosted_trees() -> Self {
        Self::new(LearnerParams::BoostedTrees(BoostParams::default()))
    }

    pub fn random_forest() -> Self {
        Self::new(LearnerParams::RandomForest(ForestParams::default()))
    }

    pub fn penalized_linear() -> Self {
        Self::new(LearnerParams::PenalizedLinear(RidgeParams::default()))
    }

    pub fn k_nearest() -> Self {
        Self::new(LearnerParams::KNearest(KnnParams::default()))
    }

    /// Parses a bare kind name with default hyperparameters.
    pub fn from_kind(kind: &str) -> Result<Self> {
        match kind {
            "boosted-trees" | "gbm" => Ok(Self::boosted_trees()),
            "random-forest" | "rf" => Ok(Self::random_forest()),
            "penalized-linear" | "ridge" => Ok(Self::penalized_linear()),
            "k-nearest" | "knn" => Ok(Self::k_nearest()),
            other => Err(Error::InvalidArgument(format!("unknown learner kind `{other}`"))),
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dropout(mut self, prob: f64) -> Self {
        self.dropout_prob = prob;
        self
    }

    pub fn kind(&self) -> &'static str {
        self.params.kind()
    }

    pub fn validate(&self) -> Result<()> {
        let checked = match &self.params {
            LearnerParams::BoostedTrees(p) => p.check(),
            LearnerParams::RandomForest(p) => p.check(),
            LearnerParams::PenalizedLinear(p) => p.check(),
            LearnerParams::KNearest(p) => p.check(),
        };
        checked.map_err(|m| Error::InvalidArgument(format!("{}: {m}", self.kind())))?;
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidArgument(format!("dropout_prob {} outside [0, 1)", self.dropout_prob)));
        }
        Ok(())
    }
}

#[derive(Clone)]
enum Fitted {
    Constant(f64),
    Boosted(Boosted),
    Forest(Forest),
    Linear(Linear),
    Knn(Knn),
    Function(RowFn),
}

/// A fitted predictor. Prediction is pure; logistic-objective predictions
/// are clipped to [`PROB_CLIP`].
#[derive(Clone)]
pub struct LearnerModel {
    fitted: Fitted,
    objective: Objective,
}

impl std::fmt::Debug for LearnerModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.fitted {
            Fitted::Constant(c) => return write!(f, "LearnerModel::Constant({c})"),
            Fitted::Boosted(_) => "boosted-trees",
            Fitted::Forest(_) => "random-forest",
            Fitted::Linear(_) => "penalized-linear",
            Fitted::Knn(_) => "k-nearest",
            Fitted::Function(_) => "function",
        };
        write!(f, "LearnerModel({kind}, {:?})", self.objective)
    }
}

impl LearnerModel {
    pub fn constant(value: f64, objective: Objective) -> Self {
        LearnerModel { fitted: Fitted::Constant(value), objective }
    }

    /// Wraps a known function, e.g. a true nuisance, as a model.
    pub fn from_fn(f: RowFn, objective: Objective) -> Self {
        LearnerModel { fitted: Fitted::Function(f), objective }
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.fitted, Fitted::Constant(_))
    }

    /// Training-loss trace of a boosted model.
    pub fn boosting_trace(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Boosted(b) => Some(&b.trace),
            _ => None,
        }
    }

    pub fn forest(&self) -> Option<&Forest> {
        match &self.fitted {
            Fitted::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let logistic = self.objective == Objective::Logistic;
        let v = match &self.fitted {
            Fitted::Constant(c) => *c,
            Fitted::Boosted(b) if logistic => crate::scalar::expit(b.raw_row(x)),
            Fitted::Boosted(b) => b.raw_row(x),
            Fitted::Forest(f) => f.predict_row(x),
            Fitted::Linear(l) => l.predict_row(x),
            Fitted::Knn(k) => k.predict_row(x),
            Fitted::Function(f) => f(x),
        };
        if logistic {
            v.clamp(PROB_CLIP.0, PROB_CLIP.1)
        } else {
            v
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn into_row_fn(self) -> RowFn {
        Arc::new(move |x| self.predict_row(x))
    }
}

/// Copy of `c` with each entry independently replaced by a standard
/// normal draw with probability `prob`.
pub fn apply_dropout(c: ArrayView2<f64>, prob: f64, seed: u64) -> Array2<f64> {
    let mut r = rng::rng_from(seed);
    let mut out = c.to_owned();
    for v in out.iter_mut() {
        if r.random::<f64>() < prob {
            *v = r.sample(StandardNormal);
        }
    }
    out
}

fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<FoldAssignment> {
    make_folds(n, folds.min(n), derive_seed(seed, TUNING_STREAM))
}

/// Held-out sum of squared errors of `fit` over `folds`.
fn held_out_sse(
    c: ArrayView2<f64>,
    r: &[f64],
    folds: &FoldAssignment,
    mut fit: impl FnMut(ArrayView2<f64>, &[f64]) -> Result<Box<dyn Fn(ArrayView1<f64>) -> f64>>,
) -> Result<f64> {
    let mut sse = 0.0;
    for k in 0..folds.k {
        let train = folds.complement(k);
        let held = folds.members(k);
        let ct = c.select(Axis(0), &train);
        let rt: Vec<f64> = train.iter().map(|&i| r[i]).collect();
        let model = fit(ct.view(), &rt)?;
        for &i in &held {
            let e = r[i] - model(c.row(i));
            sse += e * e;
        }
    }
    Ok(sse)
}

fn clip_prob(v: f64, objective: Objective) -> f64 {
    match objective {
        Objective::Logistic => v.clamp(PROB_CLIP.0, PROB_CLIP.1),
        Objective::Squared => v,
    }
}

fn fit_inner(spec: &LearnerSpec, c: ArrayView2<f64>, r: &[f64]) -> Result<Fitted> {
    let objective = spec.objective;
    let seed = derive_seed(spec.seed, FIT_STREAM);
    Ok(match &spec.params {
        LearnerParams::BoostedTrees(p) => Fitted::Boosted(boost::fit(c, r, p, objective)),
        LearnerParams::RandomForest(p) => Fitted::Forest(forest::fit(c, r, p, seed)),
        LearnerParams::PenalizedLinear(p) => {
            let folds = cv_folds(r.len(), p.folds, spec.seed)?;
            let mut best = (f64::INFINITY, p.lambdas[0]);
            for &lambda in &p.lambdas {
                let sse = held_out_sse(c, r, &folds, |ct, rt| {
                    let m = linear::fit(ct, rt, lambda, objective);
                    Ok(Box::new(move |x| clip_prob(m.predict_row(x), objective)))
                })?;
                if sse < best.0 {
                    best = (sse, lambda);
                }
            }
            Fitted::Linear(linear::fit(c, r, best.1, objective))
        }
        LearnerParams::KNearest(p) => {
            let folds = cv_folds(r.len(), p.folds, spec.seed)?;
            let mut best = (f64::INFINITY, p.ks[0]);
            for &k in &p.ks {
                let sse = held_out_sse(c, r, &folds, |ct, rt| {
                    let m = knn::fit(ct, rt, k);
                    Ok(Box::new(move |x| clip_prob(m.predict_row(x), objective)))
                })?;
                if sse < best.0 {
                    best = (sse, k);
                }
            }
            Fitted::Knn(knn::fit(c, r, best.1))
        }
    })
}

/// Fits `spec` to predict `r` from the rows of `c`.
pub fn fit_learner(spec: &LearnerSpec, c: ArrayView2<f64>, r: &[f64]) -> Result<LearnerModel> {
    spec.validate()?;
    let n = r.len();
    if c.nrows() != n {
        return Err(Error::InvalidArgument(format!("{} covariate rows for {n} responses", c.nrows())));
    }
    if n < 10 {
        return Err(Error::InvalidArgument(format!("learners need at least 10 rows, got {n}")));
    }
    if r.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite learner input".into()));
    }
    let objective = spec.objective;
    if objective == Objective::Logistic && r.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("logistic objective needs a 0/1 response".into()));
    }
    if r.iter().all(|&v| v == r[0]) {
        return Ok(LearnerModel::constant(clip_prob(r[0], objective), objective));
    }
    let dropped;
    let c = if spec.dropout_prob > 0.0 {
        dropped = apply_dropout(c, spec.dropout_prob, derive_seed(spec.seed, DROPOUT_STREAM));
        dropped.view()
    } else {
        c
    };
    let is_tree = matches!(spec.params, LearnerParams::BoostedTrees(_) | LearnerParams::RandomForest(_));
    if is_tree && c.columns().into_iter().all(|col| col.iter().all(|&v| v == col[0])) {
        log::warn!("{}: every covariate is constant, no split is possible; fitting the mean", spec.kind());
        let mean = r.iter().sum::<f64>() / n as f64;
        return Ok(LearnerModel::constant(clip_prob(mean, objective), objective));
    }
    Ok(LearnerModel { fitted: fit_inner(spec, c, r)?, objective })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub spec: LearnerSpec,
    /// Cross-validated sum of squared prediction errors per candidate.
    pub cv_sse: Vec<f64>,
}

/// Candidate with the smallest cross-validated sum of squared errors;
/// ties go to the earlier candidate.
pub fn select_best(specs: &[LearnerSpec], c: ArrayView2<f64>, r: &[f64], folds: &FoldAssignment) -> Result<Selection> {
    if specs.len() < 2 {
        return Err(Error::InvalidArgument(format!("selection needs at least 2 candidates, got {}", specs.len())));
    }
    if folds.n() != r.len() {
        return Err(Error::InvalidArgument("fold assignment does not match the rows".into()));
    }
    let mut cv_sse = Vec::with_capacity(specs.len());
    for spec in specs {
        let sse = held_out_sse(c, r, folds, |ct, rt| {
            let m = fit_learner(spec, ct, rt)?;
            Ok(Box::new(move |x| m.predict_row(x)))
        })?;
        cv_sse.push(sse);
    }
    let mut index = 0;
    for (i, &s) in cv_sse.iter().enumerate() {
        if s < cv_sse[index] {
            index = i;
        }
    }
    Ok(Selection { index, spec: specs[index].clone(), cv_sse })
}

//! The doubly robust (Neyman orthogonal) score
//! `h(D; beta, eta) = psi(X) {Y e^{-beta A} - (1 - Y) e^{r(X)}} {A - m(X)}`,
//! its estimating equation, and plug-in / multiplier-bootstrap inference.

use std::sync::Arc;

use ndarray::{ArrayView1, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::optim::solve_scalar_root;
use crate::rng;
use crate::scalar::{expit, Scalar, EXP_GUARD};

/// Evaluates the score for one observation.
pub fn score_h<F: Scalar>(y: F, a: F, beta: F, r: F, m: F, psi: F) -> Result<F> {
    if r > F::lit(EXP_GUARD) {
        return Err(Error::Pathological(format!("r(x) = {r} exceeds the exponent guard")));
    }
    let one = F::one();
    Ok(psi * (y * (-beta * a).exp() - (one - y) * r.exp()) * (a - m))
}

/// `d h / d beta` at one observation, without the sign: the integrand of `I`.
fn slope_term<F: Scalar>(y: F, a: F, beta: F, m: F, psi: F) -> F {
    psi * y * (-beta * a).exp() * a * (a - m)
}

pub type RowFn = Arc<dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync>;

/// Evaluable nuisance triple `{r, m, psi}` on raw covariate rows. When
/// `psi` is absent the simple weight `expit(-r(x))` is used.
#[derive(Clone)]
pub struct NuisanceSet {
    pub r: RowFn,
    pub m: RowFn,
    pub psi: Option<RowFn>,
}

impl std::fmt::Debug for NuisanceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NuisanceSet").field("custom_psi", &self.psi.is_some()).finish()
    }
}

impl NuisanceSet {
    pub fn new(r: RowFn, m: RowFn) -> Self {
        NuisanceSet { r, m, psi: None }
    }

    pub fn evaluate_row(&self, x: ArrayView1<f64>) -> (f64, f64, f64) {
        let r = (self.r)(x);
        let m = (self.m)(x);
        let psi = match &self.psi {
            Some(f) => f(x),
            None => expit(-r),
        };
        (r, m, psi)
    }

    pub fn evaluate(&self, x: ArrayView2<f64>) -> EtaValues<f64> {
        let mut out = EtaValues::with_capacity(x.nrows());
        for row in x.rows() {
            out.push(self.evaluate_row(row));
        }
        out
    }
}

/// Nuisance values at each row of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaValues<F> {
    pub r: Vec<F>,
    pub m: Vec<F>,
    pub psi: Vec<F>,
}

impl<F: Scalar> EtaValues<F> {
    pub fn with_capacity(n: usize) -> Self {
        EtaValues { r: Vec::with_capacity(n), m: Vec::with_capacity(n), psi: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, (r, m, psi): (F, F, F)) {
        self.r.push(r);
        self.m.push(m);
        self.psi.push(psi);
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

impl EtaValues<f64> {
    /// Row `i` takes its values from the set fitted without fold `fold_of[i]`.
    pub fn cross_fitted(sets: &[NuisanceSet], folds: &FoldAssignment, x: ArrayView2<f64>) -> Result<Self> {
        if sets.len() != folds.k || folds.n() != x.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} nuisance sets for {} folds over {} rows",
                sets.len(),
                folds.k,
                x.nrows()
            )));
        }
        let mut out = EtaValues::with_capacity(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            out.push(sets[folds.fold_of[i]].evaluate_row(row));
        }
        Ok(out)
    }
}

/// Borrowed inputs of the estimating equation. `weight` multiplies every
/// score term (and the slope `I`) when present.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInputs<'a, F> {
    pub y: &'a [F],
    pub a: &'a [F],
    pub eta: &'a EtaValues<F>,
    pub weight: Option<&'a [F]>,
}

impl<'a> ScoreInputs<'a, f64> {
    pub fn from_dataset(d: &'a Dataset, eta: &'a EtaValues<f64>, weight: Option<&'a [f64]>) -> Self {
        ScoreInputs {
            y: d.y.as_slice().expect("contiguous response"),
            a: d.a.as_slice().expect("contiguous exposure"),
            eta,
            weight,
        }
    }
}

impl<F: Scalar> ScoreInputs<'_, F> {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.y.len();
        if self.a.len() != n || self.eta.len() != n || self.weight.is_some_and(|w| w.len() != n) {
            return Err(Error::InvalidArgument("score inputs have mismatched lengths".into()));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        Ok(())
    }

    fn w(&self, i: usize) -> F {
        self.weight.map_or(F::one(), |w| w[i])
    }

    /// Per-row score values.
    pub fn scores(&self, beta: F) -> Result<Vec<F>> {
        self.check()?;
        (0..self.n())
            .map(|i| {
                let e = self.eta;
                Ok(self.w(i) * score_h(self.y[i], self.a[i], beta, e.r[i], e.m[i], e.psi[i])?)
            })
            .collect()
    }

    /// Sample mean of the score.
    pub fn value(&self, beta: F) -> Result<F> {
        let s = self.scores(beta)?;
        let n = F::from_usize(s.len()).unwrap();
        Ok(s.iter().fold(F::zero(), |acc, &v| acc + v) / n)
    }

    /// Plug-in `I = mean(w psi Y e^{-beta A} A (A - m))`.
    pub fn slope(&self, beta: F) -> Result<F> {
        self.check()?;
        let e = self.eta;
        let total = (0..self.n()).fold(F::zero(), |acc, i| {
            acc + self.w(i) * slope_term(self.y[i], self.a[i], beta, e.m[i], e.psi[i])
        });
        Ok(total / F::from_usize(self.n()).unwrap())
    }

    /// Root of the estimating equation, searched from `init` and, if no
    /// sign change is found there, from 0.
    pub fn solve_beta(&self, init: F, tol: F) -> Result<F> {
        match solve_scalar_root(|b| self.value(b), init, tol) {
            Err(Error::NoSignChange { .. }) if init != F::zero() => {
                log::warn!("no sign change around {init}; retrying with the bracket centred at 0");
                solve_scalar_root(|b| self.value(b), F::zero(), tol)
            }
            other => other,
        }
    }
}

/// Mean score over a dataset.
pub fn estimating_value(d: &Dataset, beta: f64, eta: &EtaValues<f64>, weight: Option<&[f64]>) -> Result<f64> {
    ScoreInputs::from_dataset(d, eta, weight).value(beta)
}

pub const ROOT_TOL: f64 = 1e-10;

pub fn solve_beta(d: &Dataset, eta: &EtaValues<f64>, weight: Option<&[f64]>, init: f64) -> Result<f64> {
    ScoreInputs::from_dataset(d, eta, weight).solve_beta(init, ROOT_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    /// Multiplier-bootstrap draws; 0 reports the normal interval only.
    pub bootstrap_draws: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions { bootstrap_draws: 500, level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub beta_hat: f64,
    pub i_bar: f64,
    pub sigma_hat: f64,
    pub se: f64,
    /// Bootstrap percentile interval when draws were taken, else the normal one.
    pub ci_low: f64,
    pub ci_high: f64,
    pub normal_ci_low: f64,
    pub normal_ci_high: f64,
    /// Two-sided p-value for `beta = 0`.
    pub p_value: f64,
    pub bootstrap_draws: usize,
    pub level: f64,
    /// Every score term vanished, so the standard error is zero.
    pub degenerate: bool,
}

fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Sandwich inference: `sigma^2 = I^{-2} mean(h^2)`, `se = sigma / sqrt(n)`,
/// normal interval at `level`. Returns the per-row scores alongside.
pub fn plug_in_inference(
    inputs: &ScoreInputs<'_, f64>,
    beta_hat: f64,
    level: f64,
) -> Result<(InferenceResult, Vec<f64>)> {
    let scores = inputs.scores(beta_hat)?;
    let i_bar = inputs.slope(beta_hat)?;
    if !(i_bar.abs() >= 1e-10) {
        return Err(Error::NotIdentified(i_bar));
    }
    let n = scores.len() as f64;
    let mean_sq = scores.iter().map(|h| h * h).sum::<f64>() / n;
    let sigma_hat = mean_sq.sqrt() / i_bar.abs();
    let se = sigma_hat / n.sqrt();
    let z = normal_quantile(0.5 + level / 2.0);
    let degenerate = se == 0.0;
    let p_value = if degenerate {
        if beta_hat == 0.0 { 1.0 } else { 0.0 }
    } else {
        2.0 * Normal::standard().sf((beta_hat / se).abs())
    };
    let res = InferenceResult {
        beta_hat,
        i_bar,
        sigma_hat,
        se,
        ci_low: beta_hat - z * se,
        ci_high: beta_hat + z * se,
        normal_ci_low: beta_hat - z * se,
        normal_ci_high: beta_hat + z * se,
        p_value,
        bootstrap_draws: 0,
        level,
        degenerate,
    };
    Ok((res, scores))
}

/// Percentile interval of `beta* = beta_hat + I^{-1} n^{-1} sum xi_i h_i`
/// with `xi_i ~ N(0, 1)`; draw `b` uses the stream `(seed, b)`.
pub fn multiplier_bootstrap_ci(
    beta_hat: f64,
    i_bar: f64,
    scores: &[f64],
    draws: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 100 {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least 100 draws, got {draws}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let n = scores.len() as f64;
    let mut stars: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let s: f64 = scores
                .iter()
                .map(|h| {
                    let xi: f64 = StandardNormal.sample(&mut r);
                    xi * h
                })
                .sum();
            beta_hat + s / (n * i_bar)
        })
        .collect();
    stars.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((quantile_sorted(&stars, alpha / 2.0), quantile_sorted(&stars, 1.0 - alpha / 2.0)))
}

/// Linear-interpolation (type 7) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Plug-in inference plus the bootstrap interval requested by `opts`.
pub fn infer(inputs: &ScoreInputs<'_, f64>, beta_hat: f64, opts: &InferenceOptions) -> Result<InferenceResult> {
    let (mut res, scores) = plug_in_inference(inputs, beta_hat, opts.level)?;
    if opts.bootstrap_draws > 0 {
        let (lo, hi) =
            multiplier_bootstrap_ci(beta_hat, res.i_bar, &scores, opts.bootstrap_draws, opts.level, opts.seed)?;
        res.ci_low = lo.min(beta_hat);
        res.ci_high = hi.max(beta_hat);
        res.bootstrap_draws = opts.bootstrap_draws;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_arithmetic() {
        assert_eq!(score_h(1.0, 2.0, 0.0, 0.3, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(score_h(0.0, 1.0, 0.7, 0.0, 0.0, 1.0).unwrap(), -1.0);
        for &(y, b, r, psi) in &[(0.0, 0.2, -1.0, 0.3), (1.0, -3.0, 2.0, 0.9)] {
            assert_eq!(score_h(y, 1.7, b, r, 1.7, psi).unwrap(), 0.0);
        }
        assert!(score_h(0.0, 1.0, 0.0, 31.0, 0.0, 1.0).is_err());
        assert_eq!(score_h(1.0f32, 2.0, 0.0, 0.0, 1.0, 0.5).unwrap(), 0.5f32);
    }

    fn two_term() -> (Vec<f64>, Vec<f64>, EtaValues<f64>) {
        // row 0: Y=1, A=1, m=0, psi=2 -> 2 e^{-beta}
        // row 1: Y=0, A=1, r=0, m=0, psi=1 -> -1
        let eta = EtaValues { r: vec![0.0, 0.0], m: vec![0.0, 0.0], psi: vec![2.0, 1.0] };
        (vec![1.0, 0.0], vec![1.0, 1.0], eta)
    }

    #[test]
    fn two_term_equation() {
        let (y, a, eta) = two_term();
        let inputs = ScoreInputs { y: &y, a: &a, eta: &eta, weight: None };
        for beta in [-1.0, 0.0, 0.4, 2.0] {
            let v = inputs.value(beta).unwrap();
            assert!((v - ((-beta).exp() - 0.5)).abs() < 1e-15);
        }
        let root = inputs.solve_beta(0.0, 1e-12).unwrap();
        assert!((root - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn single_observation_mean_is_the_score() {
        let eta = EtaValues { r: vec![0.2], m: vec![0.5], psi: vec![0.4] };
        let inputs = ScoreInputs { y: &[1.0], a: &[1.5], eta: &eta, weight: None };
        assert_eq!(inputs.value(0.3).unwrap(), score_h(1.0, 1.5, 0.3, 0.2, 0.5, 0.4).unwrap());
    }

    #[test]
    fn symmetric_two_point_inference_by_hand() {
        // Y=1 at A=1 and A=-1, m=0, psi=1; h_i = A_i e^{-beta A_i}
        let eta = EtaValues { r: vec![0.0; 2], m: vec![0.0; 2], psi: vec![1.0; 2] };
        let y = [1.0, 1.0];
        let a = [1.0, -1.0];
        let inputs = ScoreInputs { y: &y, a: &a, eta: &eta, weight: None };
        let beta: f64 = inputs.solve_beta(0.3, 1e-14).unwrap();
        assert!(beta.abs() < 1e-14);
        let (res, scores) = plug_in_inference(&inputs, 0.0, 0.95).unwrap();
        assert_eq!(scores, vec![1.0, -1.0]);
        // I = mean(A^2) = 1, mean h^2 = 1
        assert!((res.i_bar - 1.0).abs() < 1e-12);
        assert!((res.sigma_hat - 1.0).abs() < 1e-12);
        assert!((res.se - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((res.ci_high - 1.959963984540054 / 2f64.sqrt()).abs() < 1e-12);
        assert!((res.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_scores() {
        // h_i = 0 on a case row needs psi = 0 or A = m, which also zeroes
        // that row's contribution to I: all-zero scores are never identified
        let eta = EtaValues { r: vec![0.0; 3], m: vec![1.0, 2.0, 0.0], psi: vec![0.5, 0.5, 0.0] };
        let y = [1.0, 0.0, 1.0];
        let a = [1.0, 2.0, 3.0];
        let inputs = ScoreInputs { y: &y, a: &a, eta: &eta, weight: None };
        assert!(inputs.scores(0.2).unwrap().iter().all(|&h| h == 0.0));
        assert!(matches!(plug_in_inference(&inputs, 0.2, 0.95), Err(Error::NotIdentified(_))));
        let (lo, hi) = multiplier_bootstrap_ci(0.2, 1.3, &[0.0; 3], 200, 0.95, 1).unwrap();
        assert_eq!((lo, hi), (0.2, 0.2));
    }

    #[test]
    fn slope_zero_is_an_error() {
        let eta = EtaValues { r: vec![0.0; 2], m: vec![0.0; 2], psi: vec![1.0; 2] };
        let inputs = ScoreInputs { y: &[0.0, 0.0], a: &[1.0, 2.0], eta: &eta, weight: None };
        assert!(matches!(plug_in_inference(&inputs, 0.0, 0.95), Err(Error::NotIdentified(_))));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let a = multiplier_bootstrap_ci(0.1, 2.0, &scores, 300, 0.95, 42).unwrap();
        let b = multiplier_bootstrap_ci(0.1, 2.0, &scores, 300, 0.95, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.0 < 0.1 && a.1 > 0.1);
        assert!(multiplier_bootstrap_ci(0.1, 2.0, &scores, 99, 0.95, 42).is_err());
    }

    #[test]
    fn bootstrap_approaches_normal_limit() {
        let scores: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() + 0.3 * (i % 3) as f64 - 0.3).collect();
        let n = scores.len() as f64;
        let i_bar = 1.7;
        let (lo, hi) = multiplier_bootstrap_ci(0.5, i_bar, &scores, 50_000, 0.95, 3).unwrap();
        // conditional on the data, beta* is exactly normal with sd sqrt(sum h^2)/(n |I|)
        let sd = scores.iter().map(|h| h * h).sum::<f64>().sqrt() / (n * i_bar);
        let half = 1.959963984540054 * sd;
        assert!(((hi - lo) / 2.0 - half).abs() / half < 0.02);
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 0.02 * half);
    }
}

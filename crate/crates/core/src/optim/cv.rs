use ndarray::{Array1, Axis};
use rayon::prelude::*;

use super::loss::LossKind;
use super::penalized::{solve_penalized_from, PenalizedProblem};
use crate::data::FoldAssignment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `points` log-spaced values from `hi * sqrt(log p / n)` down to
/// `lo * sqrt(log p / n)`, descending.
pub fn default_lambda_grid(n: usize, p: usize, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let base = ((p.max(2) as f64).ln() / n as f64).sqrt();
    let (top, bottom) = (hi * base, lo * base);
    if points <= 1 {
        return vec![top];
    }
    (0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            (top.ln() + t * (bottom.ln() - top.ln())).exp()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CvSelection<F> {
    pub lambda: F,
    pub index: usize,
    /// Mean held-out loss per grid point.
    pub mean_loss: Vec<F>,
    pub skipped_folds: Vec<usize>,
}

fn degenerate<F: Scalar>(loss: LossKind, y: &Array1<F>, w: &Array1<F>) -> bool {
    let total = w.iter().fold(F::zero(), |a, &v| a + v);
    if !(total > F::zero()) {
        return true;
    }
    if !loss.requires_binary_response() {
        return false;
    }
    let mut seen = [false; 2];
    for (&yv, &wv) in y.iter().zip(w) {
        if wv > F::zero() {
            seen[usize::from(yv == F::one())] = true;
        }
    }
    !(seen[0] && seen[1])
}

/// K-fold selection of `lambda` from a descending grid: each fold fits the
/// whole path with warm starts and is scored by mean held-out weighted
/// loss. Ties go to the larger `lambda`.
pub fn cv_select_lambda<F: Scalar>(
    template: &PenalizedProblem<F>,
    grid: &[F],
    folds: &FoldAssignment,
    scoring: Option<LossKind>,
    tol: F,
    max_iter: usize,
) -> Result<CvSelection<F>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if grid.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("lambda grid must be sorted descending".into()));
    }
    if folds.n() != template.n() {
        return Err(Error::InvalidArgument("fold assignment does not match problem rows".into()));
    }
    template.validate()?;
    if grid.len() == 1 {
        return Ok(CvSelection { lambda: grid[0], index: 0, mean_loss: vec![F::zero()], skipped_folds: vec![] });
    }
    let scoring = scoring.unwrap_or(template.loss);

    let per_fold: Vec<Result<Option<Vec<F>>>> = (0..folds.k)
        .into_par_iter()
        .map(|k| {
            let train = folds.complement(k);
            let held = folds.members(k);
            let sub = |rows: &[usize], lambda: F| PenalizedProblem {
                loss: template.loss,
                design: template.design.select(Axis(0), rows),
                response: template.response.select(Axis(0), rows),
                weights: template.weights.select(Axis(0), rows),
                offset: template.offset.select(Axis(0), rows),
                lambda,
                penalty_mask: template.penalty_mask.clone(),
            };
            let mut train_prob = sub(&train, grid[0]);
            let held_prob = sub(&held, grid[0]);
            if degenerate(template.loss, &train_prob.response, &train_prob.weights)
                || degenerate(template.loss, &held_prob.response, &held_prob.weights)
            {
                log::warn!("cross-validation fold {k} is degenerate and was skipped");
                return Ok(None);
            }
            let n_held = F::from_usize(held.len()).unwrap();
            let mut start: Option<Array1<F>> = None;
            let mut losses = Vec::with_capacity(grid.len());
            for &lambda in grid {
                train_prob.lambda = lambda;
                let sol = solve_penalized_from(&train_prob, start.as_ref(), tol, max_iter)?;
                let eta = held_prob.design.dot(&sol.coef) + &held_prob.offset;
                let total = eta
                    .iter()
                    .zip(held_prob.response.iter().zip(held_prob.weights.iter()))
                    .fold(F::zero(), |a, (&e, (&y, &w))| a + w * scoring.value(y, e));
                losses.push(total / n_held);
                start = Some(sol.coef);
            }
            Ok(Some(losses))
        })
        .collect();

    let mut sums = vec![F::zero(); grid.len()];
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for (k, res) in per_fold.into_iter().enumerate() {
        match res? {
            Some(losses) => {
                used += 1;
                for (s, l) in sums.iter_mut().zip(losses) {
                    *s = *s + l;
                }
            }
            None => skipped.push(k),
        }
    }
    if used == 0 {
        return Err(Error::DegenerateFolds);
    }
    let denom = F::from_usize(used).unwrap();
    let mean_loss: Vec<F> = sums.into_iter().map(|s| s / denom).collect();
    let mut index = 0;
    for (i, &l) in mean_loss.iter().enumerate() {
        if l < mean_loss[index] {
            index = i;
        }
    }
    Ok(CvSelection { lambda: grid[index], index, mean_loss, skipped_folds: skipped })
}

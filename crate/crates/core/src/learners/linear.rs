//! Ridge-penalized linear and logistic regression on standardized
//! covariates, with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::scalar::{expit, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeParams {
    /// Candidate penalties, chosen by cross-validated squared error.
    pub lambdas: Vec<f64>,
    pub folds: usize,
}

impl Default for RidgeParams {
    fn default() -> Self {
        let lambdas = (0..10).map(|k| 10f64.powf(1.0 - 5.0 * k as f64 / 9.0)).collect();
        RidgeParams { lambdas, folds: 5 }
    }
}

impl RidgeParams {
    pub(crate) fn check(&self) -> Result<(), String> {
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err("lambdas must be a non-empty list of positive reals".into());
        }
        if self.folds < 2 {
            return Err(format!("folds {} below 2", self.folds));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub lambda: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
    pub intercept: f64,
    /// Coefficients on the standardized scale; zero for constant columns.
    pub coef: Vec<f64>,
    logistic: bool,
}

impl Linear {
    /// Linear predictor; for the logistic objective this is on the logit scale.
    pub fn raw_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut s = self.intercept;
        for j in 0..self.coef.len() {
            s += self.coef[j] * (x[j] - self.center[j]) / self.scale[j];
        }
        s
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let s = self.raw_row(x);
        if self.logistic {
            expit(s)
        } else {
            s
        }
    }
}

fn standardized(x: ArrayView2<f64>) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let (n, p) = x.dim();
    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    let mut z = DMatrix::zeros(n, p);
    for j in 0..p {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
        center[j] = m;
        if sd > 0.0 {
            scale[j] = sd;
            for i in 0..n {
                z[(i, j)] = (col[i] - m) / sd;
            }
        }
    }
    (z, center, scale)
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    for k in 0..h.nrows() {
        h[(k, k)] += 1e-10;
    }
    match h.clone().cholesky() {
        Some(c) => c.solve(g),
        None => h.lu().solve(g).unwrap_or_else(|| DVector::zeros(g.len())),
    }
}

fn penalized_deviance(z: &DMatrix<f64>, y: &[f64], b0: f64, b: &DVector<f64>, lambda: f64) -> f64 {
    let eta = z * b;
    let n = y.len() as f64;
    let fit = (0..y.len()).map(|i| softplus(b0 + eta[i]) - y[i] * (b0 + eta[i])).sum::<f64>() / n;
    fit + 0.5 * lambda * b.norm_squared()
}

/// Minimizes `mean loss + lambda / 2 |b|^2`.
pub(crate) fn fit(x: ArrayView2<f64>, y: &[f64], lambda: f64, objective: Objective) -> Linear {
    let (n, p) = x.dim();
    let nf = n as f64;
    let (z, center, scale) = standardized(x);
    let ybar = y.iter().sum::<f64>() / nf;
    let (intercept, coef) = match objective {
        Objective::Squared => {
            let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
            let mut h = z.transpose() * &z / nf;
            for k in 0..p {
                h[(k, k)] += lambda;
            }
            let b = solve_spd(h, &(z.transpose() * yc / nf));
            (ybar, b)
        }
        Objective::Logistic => {
            let mut b0 = crate::scalar::logit(ybar.clamp(1e-6, 1.0 - 1e-6));
            let mut b = DVector::zeros(p);
            let mut obj = penalized_deviance(&z, y, b0, &b, lambda);
            for _ in 0..100 {
                let eta = &z * &b;
                let mut w = DVector::zeros(n);
                let mut r = DVector::zeros(n);
                for i in 0..n {
                    let pi = expit(b0 + eta[i]);
                    w[i] = pi * (1.0 - pi);
                    r[i] = y[i] - pi;
                }
                // Newton system on (b0, b)
                let mut h = DMatrix::zeros(p + 1, p + 1);
                let mut g = DVector::zeros(p + 1);
                h[(0, 0)] = w.sum() / nf;
                g[0] = r.sum() / nf;
                let zw = DMatrix::from_fn(n, p, |i, j| z[(i, j)] * w[i]);
                let zt_w = zw.transpose();
                let hb = &zt_w * &z / nf;
                let cross = zw.row_sum() / nf;
                let gb = z.transpose() * &r / nf - &b * lambda;
                for j in 0..p {
                    h[(0, j + 1)] = cross[j];
                    h[(j + 1, 0)] = cross[j];
                    g[j + 1] = gb[j];
                    for k in 0..p {
                        h[(j + 1, k + 1)] = hb[(j, k)];
                    }
                    h[(j + 1, j + 1)] += lambda;
                }
                let step = solve_spd(h, &g);
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..30 {
                    let nb0 = b0 + t * step[0];
                    let nb = &b + step.rows(1, p) * t;
                    let nobj = penalized_deviance(&z, y, nb0, &nb, lambda);
                    if nobj <= obj {
                        b0 = nb0;
                        b = nb;
                        obj = nobj;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted || step.amax() * t < 1e-10 {
                    break;
                }
            }
            (b0, b)
        }
    };
    Linear {
        lambda,
        center,
        scale,
        intercept,
        coef: coef.iter().copied().collect(),
        logistic: objective == Objective::Logistic,
    }
}

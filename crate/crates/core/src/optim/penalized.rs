use ndarray::{Array1, Array2};

use super::loss::LossKind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `min_b n^{-1} sum_i w_i l(y_i, offset_i + x_i'b) + lambda sum_{j penalized} |b_j|`
#[derive(Debug, Clone)]
pub struct PenalizedProblem<F> {
    pub loss: LossKind,
    pub design: Array2<F>,
    pub response: Array1<F>,
    pub weights: Array1<F>,
    pub offset: Array1<F>,
    pub lambda: F,
    /// `false` marks an unpenalized coordinate.
    pub penalty_mask: Vec<bool>,
}

impl<F: Scalar> PenalizedProblem<F> {
    /// Unit weights, zero offset, every coordinate penalized.
    pub fn new(loss: LossKind, design: Array2<F>, response: Array1<F>, lambda: F) -> Self {
        let (n, p) = design.dim();
        PenalizedProblem {
            loss,
            design,
            response,
            weights: Array1::from_elem(n, F::one()),
            offset: Array1::zeros(n),
            lambda,
            penalty_mask: vec![true; p],
        }
    }

    pub fn with_weights(mut self, weights: Array1<F>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_offset(mut self, offset: Array1<F>) -> Self {
        self.offset = offset;
        self
    }

    pub fn unpenalized(mut self, j: usize) -> Self {
        self.penalty_mask[j] = false;
        self
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = self.design.dim();
        if self.response.len() != n || self.weights.len() != n || self.offset.len() != n {
            return Err(Error::InvalidArgument("problem vectors do not match design rows".into()));
        }
        if self.penalty_mask.len() != p {
            return Err(Error::InvalidArgument("penalty mask does not match design columns".into()));
        }
        if !(self.lambda >= F::zero()) {
            return Err(Error::InvalidArgument(format!("lambda = {} is negative", self.lambda)));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= F::zero())) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if self.loss.requires_binary_response()
            && self.response.iter().any(|&y| y != F::zero() && y != F::one())
        {
            return Err(Error::InvalidArgument(format!("{:?} loss needs a 0/1 response", self.loss)));
        }
        Ok(())
    }

    /// Objective at `coef`.
    pub fn objective(&self, coef: &Array1<F>) -> F {
        let eta = self.design.dot(coef) + &self.offset;
        let n = F::from_usize(self.n()).unwrap();
        let loss = eta
            .iter()
            .zip(self.response.iter().zip(self.weights.iter()))
            .fold(F::zero(), |acc, (&e, (&y, &w))| acc + w * self.loss.value(y, e));
        loss / n + self.lambda * self.penalty(coef)
    }

    fn penalty(&self, coef: &Array1<F>) -> F {
        coef.iter()
            .zip(&self.penalty_mask)
            .filter(|(_, &m)| m)
            .fold(F::zero(), |acc, (b, _)| acc + b.abs())
    }

    /// Gradient of the smooth part at `coef`.
    pub fn gradient(&self, coef: &Array1<F>) -> Array1<F> {
        let eta = self.design.dot(coef) + &self.offset;
        let n = F::from_usize(self.n()).unwrap();
        let wd1 = Array1::from_iter(
            eta.iter()
                .zip(self.response.iter().zip(self.weights.iter()))
                .map(|(&e, (&y, &w))| w * self.loss.point(y, e).d1 / n),
        );
        self.design.t().dot(&wd1)
    }

    /// Distance of `-gradient` from the subdifferential of the penalty.
    pub fn kkt_residual(&self, coef: &Array1<F>, gradient: &Array1<F>) -> F {
        kkt_residual(coef.as_slice().unwrap(), gradient.as_slice().unwrap(), self.lambda, &self.penalty_mask)
    }
}

pub(crate) fn kkt_residual<F: Scalar>(coef: &[F], grad: &[F], lambda: F, mask: &[bool]) -> F {
    coef.iter()
        .zip(grad)
        .zip(mask)
        .map(|((&b, &g), &pen)| {
            if !pen {
                g.abs()
            } else if b == F::zero() {
                (g.abs() - lambda).max(F::zero())
            } else {
                (g + lambda * b.signum()).abs()
            }
        })
        .fold(F::zero(), F::max)
}

#[derive(Debug, Clone)]
pub struct Solution<F> {
    pub coef: Array1<F>,
    pub objective: F,
    /// Smooth-part gradient at `coef`.
    pub gradient: Array1<F>,
    pub kkt_residual: F,
    pub iterations: usize,
    pub converged: bool,
    /// Samples whose exponent hit the guard at the solution.
    pub guard_hits: usize,
    /// Objective after every sweep.
    pub trace: Vec<F>,
}

impl<F: Scalar> Solution<F> {
    /// Largest `|gradient_j|` over penalized coordinates: the sup-norm
    /// moment bound the solution certifies at level `lambda`.
    pub fn penalized_moment_sup(&self, mask: &[bool]) -> F {
        self.gradient
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold(F::zero(), |acc, (g, _)| acc.max(g.abs()))
    }
}

pub fn solve_penalized<F: Scalar>(prob: &PenalizedProblem<F>, tol: F, max_iter: usize) -> Result<Solution<F>> {
    solve_penalized_from(prob, None, tol, max_iter)
}

/// Proximal Newton with coordinate-descent inner solves and
/// soft-thresholding; each accepted step lowers the objective.
pub fn solve_penalized_from<F: Scalar>(
    prob: &PenalizedProblem<F>,
    start: Option<&Array1<F>>,
    tol: F,
    max_iter: usize,
) -> Result<Solution<F>> {
    prob.validate()?;
    if !(tol > F::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut ws = Workspace::new(prob, start)?;
    ws.run(tol, max_iter)?;
    Ok(ws.finish())
}

struct Workspace<'a, F> {
    prob: &'a PenalizedProblem<F>,
    n: usize,
    p: usize,
    inv_n: F,
    /// Column-major copy of the design.
    cols: Vec<F>,
    coef: Vec<F>,
    eta: Vec<F>,
    loss: Vec<F>,
    wd1: Vec<F>,
    wd2: Vec<F>,
    capped: Vec<bool>,
    iterations: usize,
    /// Objective tracked through accepted step changes.
    running: F,
    trace: Vec<F>,
    converged: bool,
    kkt: F,
    grad: Vec<F>,
}

impl<'a, F: Scalar> Workspace<'a, F> {
    fn new(prob: &'a PenalizedProblem<F>, start: Option<&Array1<F>>) -> Result<Self> {
        let (n, p) = prob.design.dim();
        let mut cols = Vec::with_capacity(n * p);
        for j in 0..p {
            cols.extend(prob.design.column(j).iter().copied());
        }
        let coef = match start {
            Some(s) if s.len() == p => s.to_vec(),
            Some(_) => return Err(Error::InvalidArgument("warm start has wrong length".into())),
            None => vec![F::zero(); p],
        };
        let inv_n = F::one() / F::from_usize(n.max(1)).unwrap();
        let mut ws = Workspace {
            prob,
            n,
            p,
            inv_n,
            cols,
            coef,
            eta: vec![F::zero(); n],
            loss: vec![F::zero(); n],
            wd1: vec![F::zero(); n],
            wd2: vec![F::zero(); n],
            capped: vec![false; n],
            iterations: 0,
            running: F::zero(),
            trace: Vec::new(),
            converged: false,
            kkt: F::infinity(),
            grad: vec![F::zero(); p],
        };
        for i in 0..n {
            let mut e = prob.offset[i];
            for j in 0..p {
                e = e + prob.design[[i, j]] * ws.coef[j];
            }
            ws.eta[i] = e;
            ws.set_point(i, e);
        }
        ws.running = ws.objective();
        if !ws.running.is_finite() {
            return Err(Error::NonFinite { iteration: 0, coordinate: 0 });
        }
        Ok(ws)
    }

    fn set_point(&mut self, i: usize, eta: F) {
        let pt = self.prob.loss.point(self.prob.response[i], eta);
        let w = self.prob.weights[i];
        self.loss[i] = w * pt.value;
        self.wd1[i] = w * pt.d1;
        self.wd2[i] = w * pt.d2;
        self.capped[i] = pt.capped;
    }

    fn col(&self, j: usize) -> &[F] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    fn objective(&self) -> F {
        let smooth = self.loss.iter().fold(F::zero(), |a, &l| a + l) * self.inv_n;
        let pen = self
            .coef
            .iter()
            .zip(&self.prob.penalty_mask)
            .filter(|(_, &m)| m)
            .fold(F::zero(), |a, (b, _)| a + b.abs());
        smooth + self.prob.lambda * pen
    }

    fn coord_gradient(&self, j: usize) -> F {
        self.col(j).iter().zip(&self.wd1).fold(F::zero(), |a, (&x, &d)| a + x * d) * self.inv_n
    }

    /// Coordinate descent on the local quadratic model over `work`;
    /// returns the proposed coefficient change.
    fn model_step(&mut self, work: &[usize], tol: F, budget: usize) -> Vec<F> {
        let (n, lambda) = (self.n, self.prob.lambda);
        let floor = F::lit(1e-12);
        let curv: Vec<F> = work
            .iter()
            .map(|&j| {
                let h = self.col(j).iter().zip(&self.wd2).fold(F::zero(), |a, (&x, &d)| a + x * x * d);
                (h * self.inv_n).max(floor)
            })
            .collect();
        let mut delta = vec![F::zero(); work.len()];
        // u = X delta on the working columns
        let mut u = vec![F::zero(); n];
        for _ in 0..budget.max(1) {
            self.iterations += 1;
            let mut biggest = F::zero();
            for (k, &j) in work.iter().enumerate() {
                let x = &self.cols[j * n..(j + 1) * n];
                let mut g = F::zero();
                for i in 0..n {
                    g = g + x[i] * (self.wd1[i] + self.wd2[i] * u[i]);
                }
                g = g * self.inv_n;
                let h = curv[k];
                let b = self.coef[j] + delta[k];
                let target = if self.prob.penalty_mask[j] {
                    let z = h * b - g;
                    let mag = (z.abs() - lambda).max(F::zero());
                    if mag == F::zero() { F::zero() } else { z.signum() * mag / h }
                } else {
                    b - g / h
                };
                let step = target - b;
                if step != F::zero() {
                    delta[k] = delta[k] + step;
                    for i in 0..n {
                        u[i] = u[i] + step * x[i];
                    }
                    biggest = biggest.max(step.abs() * h.sqrt());
                }
            }
            if biggest <= tol * F::lit(0.01) || self.iterations >= budget {
                break;
            }
        }
        delta
    }

    /// Backtracking along `delta`; accepts the first step that does not
    /// raise the objective. Returns false when none is found.
    fn line_search(&mut self, work: &[usize], delta: &[F]) -> Result<bool> {
        let n = self.n;
        let mut dir = vec![F::zero(); n];
        for (k, &j) in work.iter().enumerate() {
            if delta[k] != F::zero() {
                let x = &self.cols[j * n..(j + 1) * n];
                for i in 0..n {
                    dir[i] = dir[i] + delta[k] * x[i];
                }
            }
        }
        let lambda = self.prob.lambda;
        let pen = |coef: &[F], t: F| {
            work.iter().enumerate().filter(|(_, &j)| self.prob.penalty_mask[j]).fold(F::zero(), |a, (k, &j)| {
                a + lambda * ((coef[j] + t * delta[k]).abs() - coef[j].abs())
            })
        };
        let mut t = F::one();
        for _ in 0..60 {
            let mut dloss = F::zero();
            let mut scratch = Vec::with_capacity(n);
            for i in 0..n {
                let e = self.eta[i] + t * dir[i];
                let pt = self.prob.loss.point(self.prob.response[i], e);
                let w = self.prob.weights[i];
                let l = w * pt.value;
                dloss = dloss + (l - self.loss[i]);
                scratch.push((e, l, w * pt.d1, w * pt.d2, pt.capped));
            }
            let change = dloss * self.inv_n + pen(&self.coef, t);
            if !change.is_finite() && t < F::lit(1e-12) {
                return Err(Error::NonFinite { iteration: self.iterations, coordinate: work[0] });
            }
            if change <= F::zero() {
                self.running = self.running + change;
                for (k, &j) in work.iter().enumerate() {
                    self.coef[j] = self.coef[j] + t * delta[k];
                }
                for (i, (e, l, d1, d2, c)) in scratch.into_iter().enumerate() {
                    self.eta[i] = e;
                    self.loss[i] = l;
                    self.wd1[i] = d1;
                    self.wd2[i] = d2;
                    self.capped[i] = c;
                }
                self.trace.push(self.running);
                return Ok(true);
            }
            t = t / F::lit(2.0);
        }
        Ok(false)
    }

    fn refresh_kkt(&mut self) {
        for j in 0..self.p {
            self.grad[j] = self.coord_gradient(j);
        }
        self.kkt = kkt_residual(&self.coef, &self.grad, self.prob.lambda, &self.prob.penalty_mask);
    }

    /// Proximal Newton: a quadratic model at the current point is solved by
    /// coordinate descent over the active coordinates plus current KKT
    /// violators, then a line search on the true objective.
    fn run(&mut self, tol: F, max_iter: usize) -> Result<()> {
        self.trace.push(self.running);
        let lambda = self.prob.lambda;
        loop {
            self.refresh_kkt();
            if self.kkt <= tol {
                self.converged = true;
                return Ok(());
            }
            if self.iterations >= max_iter {
                return Ok(());
            }
            let work: Vec<usize> = (0..self.p)
                .filter(|&j| {
                    !self.prob.penalty_mask[j] || self.coef[j] != F::zero() || self.grad[j].abs() > lambda
                })
                .collect();
            let delta = self.model_step(&work, tol, max_iter);
            if delta.iter().all(|d| *d == F::zero()) || !self.line_search(&work, &delta)? {
                return Ok(());
            }
        }
    }

    fn finish(self) -> Solution<F> {
        let objective = self.objective();
        Solution {
            coef: Array1::from(self.coef),
            objective,
            gradient: Array1::from(self.grad),
            kkt_residual: self.kkt,
            iterations: self.iterations,
            converged: self.converged,
            guard_hits: self.capped.iter().filter(|&&c| c).count(),
            trace: self.trace,
        }
    }
}

//! Gradient boosted regression trees.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, presort, RegressionTree, TreeOptions};
use super::Objective;
use crate::scalar::{expit, logit, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { rounds: 200, depth: 3, shrinkage: 0.1, min_leaf: 10 }
    }
}

impl BoostParams {
    pub(crate) fn check(&self) -> Result<(), String> {
        if !(1..=10_000).contains(&self.rounds) {
            return Err(format!("rounds {} outside 1..=10000", self.rounds));
        }
        if !(1..=3).contains(&self.depth) {
            return Err(format!("depth {} outside 1..=3", self.depth));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(format!("shrinkage {} outside (0, 1]", self.shrinkage));
        }
        if self.min_leaf == 0 {
            return Err("min_leaf must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boosted {
    pub init: f64,
    pub trees: Vec<RegressionTree>,
    /// Training loss after each round: mean squared error for the squared
    /// objective, mean deviance / 2 for the logistic one.
    pub trace: Vec<f64>,
}

impl Boosted {
    /// Additive score; for the logistic objective this is on the logit scale.
    pub fn raw_row(&self, x: ArrayView1<f64>) -> f64 {
        self.trees.iter().fold(self.init, |f, t| f + t.predict_row(x))
    }
}

fn loss(objective: Objective, y: &[f64], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    match objective {
        Objective::Squared => y.iter().zip(f).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / n,
        Objective::Logistic => y.iter().zip(f).map(|(y, f)| softplus(*f) - y * f).sum::<f64>() / n,
    }
}

/// Least-squares boosting for the squared objective; Friedman's one-step
/// Newton leaf values for the logistic one.
pub(crate) fn fit(x: ArrayView2<f64>, y: &[f64], params: &BoostParams, objective: Objective) -> Boosted {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let init = match objective {
        Objective::Squared => mean,
        Objective::Logistic => logit(mean.clamp(1e-6, 1.0 - 1e-6)),
    };
    let mut f = vec![init; n];
    let order = presort(x);
    let weight = vec![1.0; n];
    let opts = TreeOptions { max_depth: Some(params.depth), min_leaf: params.min_leaf as f64, mtry: None };
    let mut trees = Vec::with_capacity(params.rounds);
    let mut trace = Vec::with_capacity(params.rounds);
    let mut grad = vec![0.0; n];
    let mut leaf = vec![0usize; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            grad[i] = match objective {
                Objective::Squared => y[i] - f[i],
                Objective::Logistic => y[i] - expit(f[i]),
            };
        }
        let mut tree = grow_tree(x, &grad, &weight, order.clone(), opts, None);
        if objective == Objective::Logistic {
            let mut num = vec![0.0; tree.node_count()];
            let mut den = vec![0.0; tree.node_count()];
            for i in 0..n {
                leaf[i] = tree.leaf_of(x.row(i));
                let p = expit(f[i]);
                num[leaf[i]] += grad[i];
                den[leaf[i]] += p * (1.0 - p);
            }
            tree.set_leaf_values(|k| num[k] / den[k].max(1e-12));
        }
        tree.scale_leaves(params.shrinkage);
        for i in 0..n {
            f[i] += tree.predict_row(x.row(i));
        }
        trace.push(loss(objective, y, &f));
        trees.push(tree);
    }
    Boosted { init, trees, trace }
}

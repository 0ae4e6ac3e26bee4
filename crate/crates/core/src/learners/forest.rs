//! Random forest regression: bootstrap-weighted CART trees with a random
//! feature subset at every split, averaged.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, presort, restrict, RegressionTree, TreeOptions};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; defaults to `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 200, mtry: None, min_leaf: 5, bootstrap: true }
    }
}

impl ForestParams {
    pub(crate) fn check(&self) -> Result<(), String> {
        if !(1..=10_000).contains(&self.trees) {
            return Err(format!("trees {} outside 1..=10000", self.trees));
        }
        if self.mtry == Some(0) {
            return Err("mtry must be positive".into());
        }
        if self.min_leaf == 0 {
            return Err("min_leaf must be positive".into());
        }
        Ok(())
    }

    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1)).min(p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Tree `b` draws its bootstrap sample and split features from stream `(seed, b)`.
pub(crate) fn fit(x: ArrayView2<f64>, y: &[f64], params: &ForestParams, seed: u64) -> Forest {
    let n = y.len();
    let order = presort(x);
    let opts = TreeOptions { max_depth: None, min_leaf: params.min_leaf as f64, mtry: Some(params.mtry_for(x.ncols())) };
    let trees = (0..params.trees as u64)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let weight = if params.bootstrap {
                let mut w = vec![0.0; n];
                for _ in 0..n {
                    w[r.random_range(0..n)] += 1.0;
                }
                w
            } else {
                vec![1.0; n]
            };
            let sub = if params.bootstrap { restrict(&order, &weight) } else { order.clone() };
            grow_tree(x, y, &weight, sub, opts, Some(&mut r))
        })
        .collect();
    Forest { trees }
}

//! k-nearest-neighbour averaging in standardized Euclidean distance.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    /// Candidate neighbourhood sizes, chosen by cross-validated squared error.
    pub ks: Vec<usize>,
    pub folds: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { ks: vec![5, 10, 20, 40], folds: 5 }
    }
}

impl KnnParams {
    pub(crate) fn check(&self) -> Result<(), String> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err("ks must be a non-empty list of positive integers".into());
        }
        if self.folds < 2 {
            return Err(format!("folds {} below 2", self.folds));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    train: Array2<f64>,
    target: Vec<f64>,
}

impl Knn {
    /// Mean target of the `k` closest training rows; distance ties go to
    /// the lower training index.
    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let q: Vec<f64> = (0..x.len()).map(|j| (x[j] - self.center[j]) / self.scale[j]).collect();
        let mut d: Vec<(f64, usize)> = self
            .train
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let mut near: Vec<usize> = d[..k].iter().map(|&(_, i)| i).collect();
        near.sort_unstable();
        near.iter().map(|&i| self.target[i]).sum::<f64>() / k as f64
    }
}

pub(crate) fn fit(x: ArrayView2<f64>, y: &[f64], k: usize) -> Knn {
    let (n, p) = x.dim();
    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
        center[j] = m;
        if sd > 0.0 {
            scale[j] = sd;
        }
    }
    let train = Array2::from_shape_fn((n, p), |(i, j)| (x[[i, j]] - center[j]) / scale[j]);
    Knn { k, center, scale, train, target: y.to_vec() }
}

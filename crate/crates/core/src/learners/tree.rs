//! Weighted CART regression trees grown from presorted feature orders.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;

use crate::rng::Rng;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

/// Binary regression tree. Rows go left when `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    /// `None` grows until the leaf-size limit stops it.
    pub max_depth: Option<usize>,
    /// Minimum total weight in each child.
    pub min_leaf: f64,
    /// Features tried per split; `None` tries all of them.
    pub mtry: Option<usize>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        self.nodes[self.leaf_of(x)].value
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_of(&self, x: ArrayView1<f64>) -> usize {
        let mut k = 0;
        loop {
            let node = &self.nodes[k];
            if node.feature == LEAF {
                return k;
            }
            k = if x[node.feature as usize] <= node.threshold { node.left } else { node.right } as usize;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            let n = &nodes[k];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    /// Replaces the value of every leaf by `f(leaf index)`.
    pub(crate) fn set_leaf_values(&mut self, mut f: impl FnMut(usize) -> f64) {
        for (k, node) in self.nodes.iter_mut().enumerate() {
            if node.feature == LEAF {
                node.value = f(k);
            }
        }
    }

    pub(crate) fn scale_leaves(&mut self, by: f64) {
        for node in &mut self.nodes {
            if node.feature == LEAF {
                node.value *= by;
            }
        }
    }
}

/// Per-feature row orders, ascending by value with ties broken by row index.
pub(crate) fn presort(x: ArrayView2<f64>) -> Vec<Vec<u32>> {
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Restricts presorted orders to rows with positive weight.
pub(crate) fn restrict(order: &[Vec<u32>], weight: &[f64]) -> Vec<Vec<u32>> {
    order
        .iter()
        .map(|col| col.iter().copied().filter(|&i| weight[i as usize] > 0.0).collect())
        .collect()
}

struct Split {
    feature: usize,
    pos: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    target: &'a [f64],
    weight: &'a [f64],
    opts: TreeOptions,
    cols: Vec<Vec<u32>>,
    buf: Vec<u32>,
    left: Vec<bool>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn stats(&self, lo: usize, hi: usize) -> (f64, f64, bool) {
        let rows = &self.cols[0][lo..hi];
        let first = self.target[rows[0] as usize];
        let (mut w, mut s, mut constant) = (0.0, 0.0, true);
        for &i in rows {
            let i = i as usize;
            w += self.weight[i];
            s += self.weight[i] * self.target[i];
            constant &= self.target[i] == first;
        }
        (w, s, constant)
    }

    fn best_split(&self, lo: usize, hi: usize, w: f64, s: f64, features: &[usize]) -> Option<Split> {
        let parent = s * s / w;
        let mut best: Option<Split> = None;
        for &j in features {
            let col = &self.cols[j][lo..hi];
            let (mut wl, mut sl) = (0.0, 0.0);
            for t in 0..col.len() - 1 {
                let i = col[t] as usize;
                wl += self.weight[i];
                sl += self.weight[i] * self.target[i];
                let (xi, xn) = (self.x[[i, j]], self.x[[col[t + 1] as usize, j]]);
                if xi == xn {
                    continue;
                }
                let wr = w - wl;
                if wl < self.opts.min_leaf || wr < self.opts.min_leaf {
                    continue;
                }
                let sr = s - sl;
                let gain = sl * sl / wl + sr * sr / wr - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split { feature: j, pos: t + 1, threshold: 0.5 * (xi + xn), gain });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * parent.abs().max(f64::MIN_POSITIVE))
    }

    /// Stable partition of every feature's segment into left then right.
    fn partition(&mut self, lo: usize, hi: usize, split: &Split) {
        for &i in &self.cols[split.feature][lo..lo + split.pos] {
            self.left[i as usize] = true;
        }
        for col in &mut self.cols {
            self.buf.clear();
            let mut write = lo;
            for t in lo..hi {
                let i = col[t];
                if self.left[i as usize] {
                    col[write] = i;
                    write += 1;
                } else {
                    self.buf.push(i);
                }
            }
            col[write..hi].copy_from_slice(&self.buf);
        }
        for &i in &self.cols[split.feature][lo..lo + split.pos] {
            self.left[i as usize] = false;
        }
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize, rng: &mut Option<&mut Rng>) -> u32 {
        let (w, s, constant) = self.stats(lo, hi);
        let id = self.nodes.len() as u32;
        let value = if constant { self.target[self.cols[0][lo] as usize] } else { s / w };
        self.nodes.push(Node { feature: LEAF, threshold: 0.0, left: LEAF, right: LEAF, value });
        let depth_ok = self.opts.max_depth.is_none_or(|d| depth < d);
        if constant || !depth_ok || w < 2.0 * self.opts.min_leaf || hi - lo < 2 {
            return id;
        }
        let p = self.x.ncols();
        let features: Vec<usize> = match (self.opts.mtry, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < p => sample(r, p, m).into_vec(),
            _ => (0..p).collect(),
        };
        let Some(split) = self.best_split(lo, hi, w, s, &features) else {
            return id;
        };
        self.partition(lo, hi, &split);
        let mid = lo + split.pos;
        let left = self.grow(lo, mid, depth + 1, rng);
        let right = self.grow(mid, hi, depth + 1, rng);
        self.nodes[id as usize] =
            Node { feature: split.feature as u32, threshold: split.threshold, left, right, value };
        id
    }
}

/// Grows a tree on the rows listed in `order` (one presorted list per
/// feature, all listing the same rows). `rng` drives the per-split
/// feature subsample when `opts.mtry` is set.
pub(crate) fn grow_tree(
    x: ArrayView2<f64>,
    target: &[f64],
    weight: &[f64],
    order: Vec<Vec<u32>>,
    opts: TreeOptions,
    mut rng: Option<&mut Rng>,
) -> RegressionTree {
    let m = order.first().map_or(0, Vec::len);
    let mut g = Grower {
        x,
        target,
        weight,
        opts,
        cols: order,
        buf: Vec::with_capacity(m),
        left: vec![false; x.nrows()],
        nodes: Vec::new(),
    };
    if m == 0 || x.ncols() == 0 {
        return RegressionTree { nodes: vec![Node { feature: LEAF, threshold: 0.0, left: LEAF, right: LEAF, value: 0.0 }] };
    }
    g.grow(0, m, 0, &mut rng);
    RegressionTree { nodes: g.nodes }
}

/// Unweighted tree on all rows of `x`, trying every feature at every split.
pub fn fit_tree(x: ArrayView2<f64>, target: &[f64], max_depth: Option<usize>, min_leaf: usize) -> RegressionTree {
    let weight = vec![1.0; x.nrows()];
    let opts = TreeOptions { max_depth, min_leaf: min_leaf as f64, mtry: None };
    grow_tree(x, target, &weight, presort(x), opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn step_is_split_at_the_midpoint() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 1.0 } else { 3.0 }).collect();
        let t = fit_tree(x.view(), &y, Some(3), 1);
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.predict_row(array![3.4].view()), 1.0);
        assert_eq!(t.predict_row(array![3.6].view()), 3.0);
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let x = Array2::from_shape_fn((64, 2), |(i, j)| ((i * (j + 3)) % 17) as f64);
        let y: Vec<f64> = (0..64).map(|i| ((i * 7) % 13) as f64).collect();
        assert!(fit_tree(x.view(), &y, Some(2), 1).depth() <= 2);
        let t = fit_tree(x.view(), &y, None, 8);
        // every leaf holds at least 8 rows
        let mut counts = vec![0; t.node_count()];
        for row in x.rows() {
            counts[t.leaf_of(row)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 0 || c >= 8));
    }

    #[test]
    fn weights_match_duplicated_rows() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
        let y = [0.0, 1.0, 0.5, 4.0, 3.0];
        let w = [2.0, 1.0, 0.0, 3.0, 1.0];
        let opts = TreeOptions { max_depth: Some(2), min_leaf: 1.0, mtry: None };
        let weighted = grow_tree(x.view(), &y, &w, restrict(&presort(x.view()), &w), opts, None);
        let xd = array![[0.0], [0.0], [1.0], [3.0], [3.0], [3.0], [4.0]];
        let yd = [0.0, 0.0, 1.0, 4.0, 4.0, 4.0, 3.0];
        let dup = fit_tree(xd.view(), &yd, Some(2), 1);
        for v in [0.0, 0.7, 1.0, 2.2, 3.0, 3.9, 5.0] {
            let row = array![v];
            assert_eq!(weighted.predict_row(row.view()), dup.predict_row(row.view()));
        }
    }
}

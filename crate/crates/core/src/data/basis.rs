use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Knots of a three-column natural cubic spline: boundary knots at the
/// extremes and interior knots at the 1/3 and 2/3 empirical quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalSplineKnots(pub [f64; 4]);

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl NaturalSplineKnots {
    pub fn from_column(col: ArrayView1<f64>) -> Result<Self> {
        let mut sorted: Vec<f64> = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "continuous column has {} distinct values, need at least 4",
                distinct.len()
            )));
        }
        let knots = |v: &[f64]| {
            [v[0], quantile_sorted(v, 1.0 / 3.0), quantile_sorted(v, 2.0 / 3.0), v[v.len() - 1]]
        };
        let k = knots(&sorted);
        // heavy ties can collapse a quantile onto a neighbour
        let k = if k.windows(2).all(|w| w[0] < w[1]) { k } else { knots(&distinct) };
        Ok(NaturalSplineKnots(k))
    }

    /// Evaluates `(x, d1 - d3, d2 - d3)` where
    /// `d_k(x) = [(x - k_k)^3_+ - (x - k_4)^3_+] / (k_4 - k_k)`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let k = self.0;
        let cube = |u: f64| if u > 0.0 { u * u * u } else { 0.0 };
        let last = cube(x - k[3]);
        let d = |j: usize| (cube(x - k[j]) - last) / (k[3] - k[j]);
        let d3 = d(2);
        [x, d(0) - d3, d(1) - d3]
    }
}

/// Natural cubic spline basis (3 columns) of one column.
pub fn natural_spline_basis(col: ArrayView1<f64>) -> Result<Array2<f64>> {
    let knots = NaturalSplineKnots::from_column(col)?;
    let mut out = Array2::zeros((col.len(), 3));
    for (i, &v) in col.iter().enumerate() {
        let b = knots.eval(v);
        for j in 0..3 {
            out[[i, j]] = b[j];
        }
    }
    Ok(out)
}

/// Expands `q` raw covariates into: the originals, all `q(q-1)/2`
/// pairwise products in lexicographic order, then three natural-spline
/// columns per continuous variable (in column order).
pub fn basis_expand(x: ArrayView2<f64>, continuous_mask: &[bool]) -> Result<Array2<f64>> {
    let (n, q) = x.dim();
    if q == 0 || continuous_mask.len() != q {
        return Err(Error::InvalidArgument(format!(
            "continuous mask has length {} for {q} columns",
            continuous_mask.len()
        )));
    }
    let n_cont = continuous_mask.iter().filter(|&&c| c).count();
    let width = q + q * (q - 1) / 2 + 3 * n_cont;
    let mut out = Array2::zeros((n, width));
    let mut col = 0;
    for j in 0..q {
        out.column_mut(col).assign(&x.column(j));
        col += 1;
    }
    for j in 0..q {
        for k in j + 1..q {
            let prod = &x.column(j) * &x.column(k);
            out.column_mut(col).assign(&prod);
            col += 1;
        }
    }
    for j in (0..q).filter(|&j| continuous_mask[j]) {
        let block = natural_spline_basis(x.column(j))?;
        for b in 0..3 {
            out.column_mut(col).assign(&block.column(b));
            col += 1;
        }
    }
    debug_assert_eq!(col, width);
    Ok(out)
}

/// Column names matching [`basis_expand`]'s layout.
pub fn expanded_names(names: &[String], continuous_mask: &[bool]) -> Vec<String> {
    let q = names.len();
    let mut out: Vec<String> = names.to_vec();
    for j in 0..q {
        for k in j + 1..q {
            out.push(format!("{}*{}", names[j], names[k]));
        }
    }
    for j in (0..q).filter(|&j| continuous_mask[j]) {
        for b in 1..=3 {
            out.push(format!("ns({},{b})", names[j]));
        }
    }
    out
}

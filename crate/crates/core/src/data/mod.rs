//! Dataset representation, delimited-file ingestion, prevalence
//! downsampling and fold assignment.

mod basis;
mod delimited;

pub use basis::{basis_expand, expanded_names, natural_spline_basis, NaturalSplineKnots};
pub use delimited::{read_delimited, write_delimited, CovariateColumns, Schema};

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Binary response, real exposure and a dense covariate matrix.
///
/// When `has_intercept` is set, column 0 of `x` is the constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Array1<f64>,
    pub a: Array1<f64>,
    pub x: Array2<f64>,
    pub has_intercept: bool,
    pub names: ColumnNames,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub y: String,
    pub a: String,
    pub x: Vec<String>,
}

impl ColumnNames {
    pub fn generic(p: usize) -> Self {
        ColumnNames {
            y: "y".into(),
            a: "a".into(),
            x: (1..=p).map(|j| format!("x{j}")).collect(),
        }
    }
}

impl Dataset {
    /// Builds and validates a dataset without an intercept column.
    pub fn new(y: Array1<f64>, a: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        let names = ColumnNames::generic(x.ncols());
        let d = Dataset {
            y,
            a,
            x,
            has_intercept: false,
            names,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Covariate count, excluding the intercept column.
    pub fn p(&self) -> usize {
        self.x.ncols() - usize::from(self.has_intercept)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.a.len() != n || self.x.nrows() != n {
            return Err(Error::InvalidData(format!(
                "length mismatch: y={}, a={}, x rows={}",
                n,
                self.a.len(),
                self.x.nrows()
            )));
        }
        if self.names.x.len() != self.x.ncols() {
            return Err(Error::InvalidData(format!(
                "{} covariate names for {} columns",
                self.names.x.len(),
                self.x.ncols()
            )));
        }
        if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidData(format!(
                "response at row {} is {}, expected 0 or 1",
                i + 1,
                self.y[i]
            )));
        }
        if let Some(i) = self.a.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite exposure at row {}", i + 1)));
        }
        if let Some(((i, j), _)) = self.x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                i + 1,
                j + 1
            )));
        }
        if self.has_intercept && self.x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidData("intercept column is not identically 1".into()));
        }
        Ok(())
    }

    /// Copy with a leading constant column; unchanged if one is present.
    pub fn with_intercept(&self) -> Dataset {
        if self.has_intercept {
            return self.clone();
        }
        let n = self.n();
        let mut x = Array2::ones((n, self.x.ncols() + 1));
        x.slice_mut(s![.., 1..]).assign(&self.x);
        let mut names = self.names.clone();
        names.x.insert(0, INTERCEPT_NAME.into());
        Dataset {
            y: self.y.clone(),
            a: self.a.clone(),
            x,
            has_intercept: true,
            names,
        }
    }

    /// Covariates without the intercept column.
    pub fn raw_x(&self) -> ndarray::ArrayView2<'_, f64> {
        if self.has_intercept {
            self.x.slice(s![.., 1..])
        } else {
            self.x.view()
        }
    }

    /// Rows `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            y: self.y.select(Axis(0), rows),
            a: self.a.select(Axis(0), rows),
            x: self.x.select(Axis(0), rows),
            has_intercept: self.has_intercept,
            names: self.names.clone(),
        }
    }

    pub fn cases(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn prevalence(&self) -> f64 {
        self.cases() as f64 / self.n() as f64
    }
}

/// Keeps every case and a seeded uniform subset of controls so that the
/// case fraction lands on `target_prevalence` (to within one row).
pub fn downsample_controls(d: &Dataset, target_prevalence: f64, seed: u64) -> Result<Dataset> {
    if !(target_prevalence > 0.0 && target_prevalence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target prevalence {target_prevalence} outside (0, 1)"
        )));
    }
    let cases: Vec<usize> = (0..d.n()).filter(|&i| d.y[i] == 1.0).collect();
    let mut controls: Vec<usize> = (0..d.n()).filter(|&i| d.y[i] == 0.0).collect();
    let keep = (cases.len() as f64 * (1.0 - target_prevalence) / target_prevalence).round() as usize;
    if keep > controls.len() {
        return Err(Error::InvalidArgument(format!(
            "prevalence {:.4} already at or above target {target_prevalence}; reaching it would drop cases",
            d.prevalence()
        )));
    }
    let mut rng = rng::rng_from(seed);
    controls.shuffle(&mut rng);
    controls.truncate(keep);
    let mut rows: Vec<usize> = cases.into_iter().chain(controls).collect();
    rows.sort_unstable();
    Ok(d.subset(&rows))
}

/// Balanced random partition of `0..n` into `k` folds. Fold labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    /// Rows in fold `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == k).collect()
    }

    /// Rows outside fold `k`, ascending.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != k).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} must satisfy 2 <= k <= n = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::rng_from(seed));
    let mut fold_of = vec![0; n];
    for (slot, &i) in perm.iter().enumerate() {
        fold_of[i] = slot % k;
    }
    Ok(FoldAssignment { fold_of, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(y: Vec<f64>) -> Dataset {
        let n = y.len();
        let a = Array1::from_iter((0..n).map(|i| i as f64));
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 3 + j) as f64);
        Dataset::new(Array1::from(y), a, x).unwrap()
    }

    #[test]
    fn folds_are_balanced() {
        let f = make_folds(10, 5, 1).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
        let mut s = make_folds(11, 5, 1).unwrap().sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn folds_deterministic_and_seed_sensitive() {
        assert_eq!(make_folds(50, 5, 3).unwrap(), make_folds(50, 5, 3).unwrap());
        let differ = (0..100)
            .filter(|&s| make_folds(50, 5, s).unwrap() != make_folds(50, 5, s + 1).unwrap())
            .count();
        assert_eq!(differ, 100);
    }

    #[test]
    fn folds_reject_k_above_n() {
        assert!(make_folds(3, 4, 0).is_err());
        assert!(make_folds(3, 1, 0).is_err());
    }

    #[test]
    fn downsample_counts() {
        let mut y = vec![1.0; 100];
        y.extend(vec![0.0; 900]);
        let d = toy(y);
        let out = downsample_controls(&d, 0.25, 9).unwrap();
        assert_eq!(out.cases(), 100);
        assert_eq!(out.n() - out.cases(), 300);
        out.validate().unwrap();
        assert_eq!(out, downsample_controls(&d, 0.25, 9).unwrap());
    }

    #[test]
    fn downsample_keeps_rows_intact() {
        let mut y = vec![1.0; 10];
        y.extend(vec![0.0; 90]);
        let d = toy(y);
        let out = downsample_controls(&d, 0.5, 2).unwrap();
        for i in 0..out.n() {
            // exposure encodes the original row index
            let orig = out.a[i] as usize;
            assert_eq!(out.x.row(i), d.x.row(orig));
            assert_eq!(out.y[i], d.y[orig]);
        }
    }

    #[test]
    fn downsample_unreachable_target() {
        let d = toy(vec![1.0, 1.0, 0.0, 0.0]);
        assert!(downsample_controls(&d, 0.25, 0).is_err());
    }

    #[test]
    fn validation_catches_bad_response() {
        let d = Dataset::new(array![0.0, 2.0], array![1.0, 1.0], Array2::zeros((2, 1)));
        assert!(d.is_err());
    }

    #[test]
    fn intercept_prepended_once() {
        let d = toy(vec![0.0, 1.0, 1.0]).with_intercept();
        assert!(d.has_intercept);
        assert_eq!(d.p(), 2);
        assert_eq!(d.x.ncols(), 3);
        d.validate().unwrap();
        assert_eq!(d.with_intercept(), d);
        assert_eq!(d.raw_x(), toy(vec![0.0, 1.0, 1.0]).x);
    }
}

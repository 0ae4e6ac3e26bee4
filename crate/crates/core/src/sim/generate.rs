use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::expit;
use crate::score::RowFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Config {
    /// Both linear nuisance models correct.
    HdI,
    /// `r` has pairwise interactions (linear `r` misspecified), `m` linear.
    HdII,
    /// `r` linear, exposure mean nonlinear in `X` (linear `m` misspecified).
    HdIII,
    /// Nonlinear `a0` and `r0` over 20 truncated correlated normals.
    Ml,
}

impl Config {
    pub fn true_beta(self) -> f64 {
        match self {
            Config::Ml => 1.0,
            _ => 0.5,
        }
    }

    pub fn default_p(self) -> usize {
        match self {
            Config::Ml => 20,
            _ => 200,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Config::HdI => "hd-i",
            Config::HdII => "hd-ii",
            Config::HdIII => "hd-iii",
            Config::Ml => "ml",
        }
    }
}

impl std::str::FromStr for Config {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hd-i" => Ok(Config::HdI),
            "hd-ii" => Ok(Config::HdII),
            "hd-iii" => Ok(Config::HdIII),
            "ml" => Ok(Config::Ml),
            other => Err(Error::InvalidArgument(format!("unknown generator config `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub config: Config,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(config: Config, n: usize, seed: u64) -> Self {
        GeneratorSpec { config, n, p: config.default_p(), seed }
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::InvalidArgument(format!("n = {} below 50", self.n)));
        }
        let min_p = match self.config {
            Config::Ml => 12,
            _ => 5,
        };
        if self.p < min_p {
            return Err(Error::InvalidArgument(format!(
                "{} needs p >= {min_p}, got {}",
                self.config.name(),
                self.p
            )));
        }
        Ok(())
    }
}

/// True nuisance functions on raw covariate rows, where available.
#[derive(Clone)]
pub struct Oracle {
    pub r0: RowFn,
    /// `E[A | Y = 0, X]`; not available in closed form for `hd-iii`.
    pub m0: Option<RowFn>,
    /// `E[A | X]`, for designs that specify it directly.
    pub a0: Option<RowFn>,
}

pub struct Generated {
    pub data: Dataset,
    pub true_beta: f64,
    pub oracle: Oracle,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    match spec.config {
        Config::HdI | Config::HdII => HdGaussianDesign::new(spec.config, spec.p)?.sample(spec.n, spec.seed),
        Config::HdIII => hd_iii(spec),
        Config::Ml => ml(spec),
    }
}

/// Row-sparse lower-triangular factor.
#[derive(Debug, Clone)]
struct SparseLower {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseLower {
    fn from_dense(l: &DMatrix<f64>) -> Self {
        let rows = (0..l.nrows())
            .map(|i| (0..=i).filter_map(|j| (l[(i, j)] != 0.0).then(|| (j, l[(i, j)]))).collect())
            .collect();
        SparseLower { rows }
    }

    fn apply(&self, eps: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * eps[j]).sum();
        }
    }
}

/// Class-conditional Gaussian design over `(A, X_1..X_p)` given `Y`.
///
/// The precision matrices are the benchmark ones: diagonal 1.5 for `A` and
/// 1.2 for each `X_j`, coupling 0.2 between `A` and `X_1..X_4`; the
/// `hd-ii` control class adds 0.075 between each pair of `X_1, X_2, X_3`.
/// Case means put 0.4 on `A` and -0.25 on `X_1, X_2`; control means are 0.
#[derive(Debug, Clone)]
pub struct HdGaussianDesign {
    pub config: Config,
    pub p: usize,
    pub precision: [DMatrix<f64>; 2],
    pub mean: [DVector<f64>; 2],
    factors: [SparseLower; 2],
    beta: f64,
    r_const: f64,
    r_linear: Vec<f64>,
    /// Upper-triangle entries `(j, k, c)` of the quadratic part of `r0`.
    r_quad: Vec<(usize, usize, f64)>,
    m_slope: Vec<(usize, f64)>,
}

impl HdGaussianDesign {
    pub fn precision_matrix(config: Config, p: usize, class: usize) -> DMatrix<f64> {
        let d = p + 1;
        let mut om = DMatrix::zeros(d, d);
        om[(0, 0)] = 1.5;
        for i in 1..d {
            om[(i, i)] = 1.2;
        }
        for j in 1..=4 {
            om[(0, j)] = 0.2;
            om[(j, 0)] = 0.2;
        }
        if config == Config::HdII && class == 0 {
            for (i, j) in [(1, 2), (1, 3), (2, 3)] {
                om[(i, j)] = 0.075;
                om[(j, i)] = 0.075;
            }
        }
        om
    }

    pub fn new(config: Config, p: usize) -> Result<Self> {
        if !matches!(config, Config::HdI | Config::HdII) {
            return Err(Error::InvalidArgument("Gaussian class-conditional design is hd-i/hd-ii only".into()));
        }
        let d = p + 1;
        let precision = [Self::precision_matrix(config, p, 0), Self::precision_matrix(config, p, 1)];
        let mut mu1 = DVector::zeros(d);
        mu1[0] = 0.4;
        mu1[1] = -0.25;
        mu1[2] = -0.25;
        let mean = [DVector::zeros(d), mu1];

        let mut factors = Vec::with_capacity(2);
        let mut log_det = [0.0; 2];
        for c in 0..2 {
            let chol = precision[c]
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidData("precision matrix is not positive definite".into()))?;
            log_det[c] = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let sigma = chol.inverse();
            let l = sigma
                .cholesky()
                .ok_or_else(|| Error::InvalidData("covariance matrix is not positive definite".into()))?
                .unpack();
            factors.push(SparseLower::from_dense(&l));
        }
        let factors: [SparseLower; 2] = factors.try_into().unwrap();

        // log-odds(z) = c + b'z + z'Qz with b = O1 mu1 - O0 mu0, Q = (O0 - O1) / 2
        let b = &precision[1] * &mean[1] - &precision[0] * &mean[0];
        let quad_a = precision[0].row(0) - precision[1].row(0);
        if quad_a.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidData("exposure enters the log-odds nonlinearly".into()));
        }
        let r_const = -0.5 * mean[1].dot(&(&precision[1] * &mean[1])) + 0.5 * mean[0].dot(&(&precision[0] * &mean[0]))
            + 0.5 * (log_det[1] - log_det[0]);
        let mut r_quad = Vec::new();
        for j in 1..d {
            for k in j..d {
                let q = 0.5 * (precision[0][(j, k)] - precision[1][(j, k)]);
                if q != 0.0 {
                    r_quad.push((j - 1, k - 1, if j == k { q } else { 2.0 * q }));
                }
            }
        }
        // E[A | X, Y = 0] = mu0_A - (O0_AX / O0_AA)(x - mu0_X)
        let m_slope = (1..d)
            .filter(|&j| precision[0][(0, j)] != 0.0)
            .map(|j| (j - 1, -precision[0][(0, j)] / precision[0][(0, 0)]))
            .collect();
        Ok(HdGaussianDesign {
            config,
            p,
            beta: b[0],
            r_const,
            r_linear: b.iter().skip(1).copied().collect(),
            r_quad,
            m_slope,
            precision,
            mean,
            factors,
        })
    }

    /// Coefficient of `A` in the log-odds.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Intercept and `X` coefficients of the linear part of `r0`.
    pub fn r_linear(&self) -> (f64, &[f64]) {
        (self.r_const, &self.r_linear)
    }

    pub fn r_quadratic(&self) -> &[(usize, usize, f64)] {
        &self.r_quad
    }

    pub fn oracle(&self) -> Oracle {
        let c = self.r_const;
        let lin = self.r_linear.clone();
        let quad = self.r_quad.clone();
        let r0: RowFn = Arc::new(move |x: ArrayView1<f64>| {
            let mut v = c + lin.iter().zip(x.iter()).map(|(b, x)| b * x).sum::<f64>();
            for &(j, k, q) in &quad {
                v += q * x[j] * x[k];
            }
            v
        });
        let slope = self.m_slope.clone();
        let m0: RowFn = Arc::new(move |x: ArrayView1<f64>| slope.iter().map(|&(j, s)| s * x[j]).sum());
        Oracle { r0, m0: Some(m0), a0: None }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Generated> {
        let d = self.p + 1;
        let mut r = rng::rng_from(seed);
        let mut y = Array1::zeros(n);
        let mut a = Array1::zeros(n);
        let mut x = Array2::zeros((n, self.p));
        let mut eps = vec![0.0; d];
        let mut z = vec![0.0; d];
        for i in 0..n {
            let class = usize::from(r.random::<f64>() < 0.5);
            for e in eps.iter_mut() {
                *e = r.sample(StandardNormal);
            }
            self.factors[class].apply(&eps, &mut z);
            y[i] = class as f64;
            a[i] = z[0] + self.mean[class][0];
            for j in 0..self.p {
                x[[i, j]] = z[j + 1] + self.mean[class][j + 1];
            }
        }
        Ok(Generated { data: Dataset::new(y, a, x)?, true_beta: self.beta, oracle: self.oracle() })
    }
}

fn hd_iii(spec: &GeneratorSpec) -> Result<Generated> {
    let (n, p) = (spec.n, spec.p);
    let mut sigma = DMatrix::zeros(p, p);
    for i in 0..p {
        sigma[(i, i)] = 0.5;
    }
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                sigma[(i, j)] = 0.15;
            }
        }
    }
    let l = sigma
        .cholesky()
        .ok_or_else(|| Error::InvalidData("covariance matrix is not positive definite".into()))?
        .unpack();
    let factor = SparseLower::from_dense(&l);
    let a0 = |x: &[f64]| {
        0.15 * (x[0] + x[1] + x[2] + x[3]) + 0.075 * (x[0] * x[1] + x[0] * x[2] + x[1] * x[2])
    };
    let r0 = |x: &[f64]| 0.25 * (x[0] + x[1]) + 0.1 * (x[2] + x[3]);

    let mut r = rng::rng_from(spec.seed);
    let mut y = Array1::zeros(n);
    let mut a = Array1::zeros(n);
    let mut x = Array2::zeros((n, p));
    let mut eps = vec![0.0; p];
    let mut row = vec![0.0; p];
    for i in 0..n {
        for e in eps.iter_mut() {
            *e = r.sample(StandardNormal);
        }
        factor.apply(&eps, &mut row);
        let ai = a0(&row) + r.sample::<f64, _>(StandardNormal);
        let pr = expit(0.5 * ai + r0(&row));
        y[i] = f64::from(r.random::<f64>() < pr);
        a[i] = ai;
        x.row_mut(i).assign(&ArrayView1::from(&row));
    }
    let oracle = Oracle {
        r0: Arc::new(move |x: ArrayView1<f64>| 0.25 * (x[0] + x[1]) + 0.1 * (x[2] + x[3])),
        m0: None,
        a0: Some(Arc::new(move |x: ArrayView1<f64>| {
            0.15 * (x[0] + x[1] + x[2] + x[3]) + 0.075 * (x[0] * x[1] + x[0] * x[2] + x[1] * x[2])
        })),
    };
    Ok(Generated { data: Dataset::new(y, a, x)?, true_beta: 0.5, oracle })
}

pub const ZETA_A: [f64; 8] = [2.0, -2.0, 1.0, 1.0, 0.5, -0.5, 0.2, 0.2];
pub const ZETA_R: [f64; 9] = [0.1, 0.1, 0.1, -0.5, 0.5, 1.0, -1.0, 0.25, -0.25];

fn indicator(v: f64) -> f64 {
    f64::from(v > 0.0)
}

/// Exposure-mean basis of the `ml` design (columns 1-based in the comments).
pub fn f_a(x: ArrayView1<f64>) -> [f64; 8] {
    [
        1.0 / (1.0 + x[0].exp()),
        1.0 / (1.0 + x[1].exp()),
        x[2].sin(),
        x[3].cos(),
        indicator(x[4]),
        indicator(x[5]),
        x[6] * x[7],
        x[8] * x[9],
    ]
}

/// Log-odds basis of the `ml` design.
pub fn f_r(x: ArrayView1<f64>) -> [f64; 9] {
    [
        x[0] * x[1] * x[2],
        x[3] * x[4],
        x[5].powi(3),
        x[6].sin().powi(2),
        x[7].cos(),
        1.0 / (1.0 + x[8] * x[8]),
        1.0 / (1.0 + x[9].exp()),
        indicator(x[10]),
        indicator(x[11]),
    ]
}

fn ml_a0(x: ArrayView1<f64>) -> f64 {
    ZETA_A.iter().zip(f_a(x)).map(|(z, f)| z * f).sum()
}

fn ml_r0(x: ArrayView1<f64>) -> f64 {
    ZETA_R.iter().zip(f_r(x)).map(|(z, f)| z * f).sum()
}

/// `E[A | Y = 0, X = x]` in the `ml` design, by composite Simpson
/// quadrature of `A ~ N(a0, 1)` reweighted by `P(Y = 0 | A, x)`.
pub fn ml_m0(x: ArrayView1<f64>) -> f64 {
    let a0 = ml_a0(x);
    let r0 = ml_r0(x);
    let half_width = 10.0;
    let steps = 2000;
    let h = 2.0 * half_width / steps as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=steps {
        let t = -half_width + k as f64 * h;
        let a = a0 + t;
        let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let dens = (-0.5 * t * t).exp() * expit(-(a + r0));
        num += w * a * dens;
        den += w * dens;
    }
    num / den
}

fn ml(spec: &GeneratorSpec) -> Result<Generated> {
    let (n, p) = (spec.n, spec.p);
    let mut r = rng::rng_from(spec.seed);
    let mut y = Array1::zeros(n);
    let mut a = Array1::zeros(n);
    let mut x = Array2::zeros((n, p));
    let (shared, own) = (0.2f64.sqrt(), 0.8f64.sqrt());
    for i in 0..n {
        let common: f64 = r.sample(StandardNormal);
        for j in 0..p {
            let z: f64 = shared * common + own * r.sample::<f64, _>(StandardNormal);
            x[[i, j]] = z.clamp(-2.0, 2.0);
        }
        let row = x.row(i);
        let ai = ml_a0(row) + r.sample::<f64, _>(StandardNormal);
        let pr = expit(ai + ml_r0(row));
        a[i] = ai;
        y[i] = f64::from(r.random::<f64>() < pr);
    }
    let oracle = Oracle {
        r0: Arc::new(ml_r0),
        m0: Some(Arc::new(ml_m0)),
        a0: Some(Arc::new(ml_a0)),
    };
    Ok(Generated { data: Dataset::new(y, a, x)?, true_beta: 1.0, oracle })
}

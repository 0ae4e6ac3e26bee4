use anyhow::{Context, Result};
use lplm_core::data::{basis_expand, downsample_controls, expanded_names, read_delimited, CovariateColumns, Dataset, Schema};
use lplm_core::dml::fit_dml;
use lplm_core::hd::fit_hd;
use lplm_core::rng::derive_seed;
use lplm_core::sim::{run_replicates, Estimator, GeneratorSpec, SimReport};
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::args::{EstimatorKind, FitSettings, SimSettings};

/// One line of `fit-*` output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub command: String,
    pub input: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub covariates: Vec<String>,
    pub beta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Serialized `HdFit` or `DmlFit`: stage lambdas, KKT residuals,
    /// fold seeds and the full inference block.
    pub fit: serde_json::Value,
}

fn continuous_mask(d: &Dataset) -> Vec<bool> {
    d.raw_x()
        .axis_iter(Axis(1))
        .map(|col| {
            let mut seen: Vec<u64> = Vec::new();
            for v in col {
                let b = v.to_bits();
                if !seen.contains(&b) {
                    seen.push(b);
                    if seen.len() > 2 {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

/// Reads the input file and applies downsampling and basis expansion.
pub fn load(s: &FitSettings) -> Result<Dataset> {
    let mut schema = Schema::new(s.y.clone(), s.a.clone());
    if let Some(cols) = &s.x {
        schema.x = CovariateColumns::Named(cols.clone());
    }
    let mut d = read_delimited(&s.input, &schema).with_context(|| format!("reading {}", s.input.display()))?;
    if let Some(prev) = s.downsample_prevalence {
        d = downsample_controls(&d, prev, derive_seed(s.common.seed, 100)).context("downsampling controls")?;
    }
    if s.expand_basis {
        let mask = continuous_mask(&d);
        let x = basis_expand(d.raw_x(), &mask).context("basis expansion")?;
        let mut names = d.names.clone();
        names.x = expanded_names(&names.x, &mask);
        d = Dataset { x, names, ..d };
        d.validate()?;
    }
    Ok(d)
}

pub fn fit(command: &str, s: &FitSettings) -> Result<FitRecord> {
    let d = load(s)?;
    let (fit, inference) = if command == "fit-hd" {
        let f = fit_hd(&d, &s.common.hd).context("fit-hd")?;
        let inf = f.inference.clone();
        (serde_json::to_value(&f)?, inf)
    } else {
        let f = fit_dml(&d, &s.common.dml).context("fit-dml")?;
        let inf = f.inference.clone();
        (serde_json::to_value(&f)?, inf)
    };
    Ok(FitRecord {
        command: command.into(),
        input: s.input.display().to_string(),
        seed: s.common.seed,
        n: d.n(),
        p: d.p(),
        covariates: d.names.x.clone(),
        beta_hat: inference.beta_hat,
        se: inference.se,
        ci_low: inference.ci_low,
        ci_high: inference.ci_high,
        p_value: inference.p_value,
        fit,
    })
}

pub fn simulate(s: &SimSettings) -> Result<SimReport> {
    let spec = GeneratorSpec::new(s.config, s.n, s.common.seed).with_p(s.p);
    let estimator: &dyn Estimator = match s.estimator {
        EstimatorKind::Hd => &s.common.hd,
        EstimatorKind::Dml => &s.common.dml,
    };
    run_replicates(&spec, estimator, s.reps, s.common.threads).context("simulate")
}

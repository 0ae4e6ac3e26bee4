use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, GeneratorSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Point estimate and interval returned by one estimator run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub beta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Anything that maps a dataset (raw covariates, no intercept) to an estimate.
pub trait Estimator: Sync {
    fn name(&self) -> String;
    fn estimate(&self, data: &Dataset, seed: u64) -> Result<Estimate>;
}

impl<F> Estimator for (String, F)
where
    F: Fn(&Dataset, u64) -> Result<Estimate> + Sync,
{
    fn name(&self) -> String {
        self.0.clone()
    }
    fn estimate(&self, data: &Dataset, seed: u64) -> Result<Estimate> {
        (self.1)(data, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    /// `None` when the fit failed; the message is in `error`.
    pub estimate: Option<Estimate>,
    pub covered: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mse: f64,
    /// Absolute value of the mean error.
    pub bias: f64,
    pub cp: f64,
    pub sd: f64,
    pub mean_se: f64,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuntimeStats {
    pub total_secs: f64,
    pub mean_fit_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub spec: GeneratorSpec,
    pub estimator: String,
    pub replicates: usize,
    pub true_beta: f64,
    pub summary: Summary,
    pub records: Vec<ReplicateRecord>,
    /// Wall-clock timings; excluded from serialized records so they stay reproducible.
    #[serde(skip)]
    pub runtime: RuntimeStats,
}

/// Aggregates replicate records against the true coefficient.
pub fn aggregate(records: &[ReplicateRecord], true_beta: f64) -> Summary {
    let ok: Vec<&Estimate> = records.iter().filter_map(|r| r.estimate.as_ref()).collect();
    let m = ok.len();
    let failed = records.len() - m;
    if m == 0 {
        return Summary { mse: f64::NAN, bias: f64::NAN, cp: f64::NAN, sd: f64::NAN, mean_se: f64::NAN, succeeded: 0, failed };
    }
    let mf = m as f64;
    let mean = ok.iter().map(|e| e.beta_hat).sum::<f64>() / mf;
    let mse = ok.iter().map(|e| (e.beta_hat - true_beta).powi(2)).sum::<f64>() / mf;
    let covered = ok.iter().filter(|e| e.ci_low <= true_beta && true_beta <= e.ci_high).count();
    let sd = if m > 1 {
        (ok.iter().map(|e| (e.beta_hat - mean).powi(2)).sum::<f64>() / (mf - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary {
        mse,
        bias: (mean - true_beta).abs(),
        cp: covered as f64 / mf,
        sd,
        mean_se: ok.iter().map(|e| e.se).sum::<f64>() / mf,
        succeeded: m,
        failed,
    }
}

/// Runs `replicates` independent generate-and-fit rounds.
///
/// Replicate `r` draws its data from `derive_seed(derive_seed(spec.seed, r), 0)`
/// and hands the estimator `derive_seed(derive_seed(spec.seed, r), 1)`, so
/// results do not depend on `threads`.
pub fn run_replicates(
    spec: &GeneratorSpec,
    estimator: &dyn Estimator,
    replicates: usize,
    threads: Option<usize>,
) -> Result<SimReport> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    spec.validate()?;
    let true_beta = spec.config.true_beta();
    let start = Instant::now();
    let one = |r: usize| -> (ReplicateRecord, f64) {
        let rep_seed = derive_seed(spec.seed, r as u64);
        let t0 = Instant::now();
        let outcome = generate(&GeneratorSpec { seed: derive_seed(rep_seed, 0), ..*spec })
            .and_then(|g| estimator.estimate(&g.data, derive_seed(rep_seed, 1)));
        let secs = t0.elapsed().as_secs_f64();
        let record = match outcome {
            Ok(e) => ReplicateRecord {
                replicate: r,
                seed: rep_seed,
                covered: Some(e.ci_low <= true_beta && true_beta <= e.ci_high),
                estimate: Some(e),
                error: None,
            },
            Err(err) => {
                log::warn!("replicate {r} failed: {err}");
                ReplicateRecord { replicate: r, seed: rep_seed, estimate: None, covered: None, error: Some(err.to_string()) }
            }
        };
        (record, secs)
    };
    let results: Vec<(ReplicateRecord, f64)> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| (0..replicates).into_par_iter().map(one).collect())
        }
        None => (0..replicates).into_par_iter().map(one).collect(),
    };
    let fit_secs: f64 = results.iter().map(|(_, s)| s).sum();
    let records: Vec<ReplicateRecord> = results.into_iter().map(|(r, _)| r).collect();
    let summary = aggregate(&records, true_beta);
    if summary.failed as f64 > 0.05 * replicates as f64 {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::InvalidData(format!(
            "{} of {replicates} replicates failed (first: {first})",
            summary.failed
        )));
    }
    Ok(SimReport {
        spec: *spec,
        estimator: estimator.name(),
        replicates,
        true_beta,
        summary,
        records,
        runtime: RuntimeStats {
            total_secs: start.elapsed().as_secs_f64(),
            mean_fit_secs: fit_secs / replicates as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Config;

    fn stub(offset: f64, half_width: f64) -> (String, impl Fn(&Dataset, u64) -> Result<Estimate> + Sync) {
        ("stub".to_string(), move |_: &Dataset, _| {
            let b = 0.5 + offset;
            Ok(Estimate { beta_hat: b, se: half_width, ci_low: b - half_width, ci_high: b + half_width })
        })
    }

    #[test]
    fn exact_stub_gives_zero_error_full_coverage() {
        let spec = GeneratorSpec::new(Config::HdI, 60, 1).with_p(5);
        let rep = run_replicates(&spec, &stub(0.0, 0.0), 7, Some(1)).unwrap();
        assert_eq!(rep.summary.mse, 0.0);
        assert_eq!(rep.summary.bias, 0.0);
        assert_eq!(rep.summary.cp, 1.0);
    }

    #[test]
    fn shifted_stub_arithmetic() {
        let spec = GeneratorSpec::new(Config::HdI, 60, 1).with_p(5);
        let rep = run_replicates(&spec, &stub(0.1, 0.01), 5, Some(2)).unwrap();
        assert!((rep.summary.mse - 0.01).abs() < 1e-12);
        assert!((rep.summary.bias - 0.1).abs() < 1e-12);
        assert_eq!(rep.summary.cp, 0.0);
        assert_eq!(aggregate(&rep.records, 0.5), rep.summary);
    }

    #[test]
    fn failures_beyond_five_percent_error() {
        let spec = GeneratorSpec::new(Config::HdI, 60, 1).with_p(5);
        let flaky = ("flaky".to_string(), |d: &Dataset, _| {
            if d.y[0] == 1.0 {
                Err(Error::InvalidData("boom".into()))
            } else {
                Ok(Estimate { beta_hat: 0.5, se: 0.1, ci_low: 0.4, ci_high: 0.6 })
            }
        });
        assert!(run_replicates(&spec, &flaky, 20, None).is_err());
    }
}

//! Record formats. `json-record` writes one JSON object per line,
//! `csv-records` a header and one row per estimate, `table` aligned text.

use std::fmt::Write as _;

use anyhow::Result;
use lplm_core::sim::SimReport;

use crate::args::Format;
use crate::run::FitRecord;

fn csv_string<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(f: F) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn num(v: f64) -> String {
    // shortest representation that parses back to the same bits
    format!("{v:?}")
}

pub fn render_fit(r: &FitRecord, format: Format) -> Result<String> {
    Ok(match format {
        Format::JsonRecord => serde_json::to_string(r)? + "\n",
        Format::CsvRecords => csv_string(|w| {
            w.write_record(["command", "n", "p", "seed", "beta_hat", "se", "ci_low", "ci_high", "p_value"])?;
            w.write_record([
                r.command.clone(),
                r.n.to_string(),
                r.p.to_string(),
                r.seed.to_string(),
                num(r.beta_hat),
                num(r.se),
                num(r.ci_low),
                num(r.ci_high),
                num(r.p_value),
            ])
        })?,
        Format::Table => {
            let mut s = String::new();
            writeln!(s, "{} on {} (n = {}, p = {}, seed = {})", r.command, r.input, r.n, r.p, r.seed)?;
            writeln!(s, "{:<10} {:>12} {:>12} {:>12} {:>12} {:>10}", "", "estimate", "std.err", "ci.low", "ci.high", "p-value")?;
            writeln!(
                s,
                "{:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10.4}",
                "beta", r.beta_hat, r.se, r.ci_low, r.ci_high, r.p_value
            )?;
            s
        }
    })
}

pub fn render_sim(r: &SimReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::JsonRecord => serde_json::to_string(r)? + "\n",
        Format::CsvRecords => csv_string(|w| {
            w.write_record(["replicate", "seed", "beta_hat", "se", "ci_low", "ci_high", "covered", "error"])?;
            for rec in &r.records {
                let (b, se, lo, hi) = match &rec.estimate {
                    Some(e) => (num(e.beta_hat), num(e.se), num(e.ci_low), num(e.ci_high)),
                    None => Default::default(),
                };
                let covered = rec.covered.map(|c| c.to_string()).unwrap_or_default();
                w.write_record([
                    rec.replicate.to_string(),
                    rec.seed.to_string(),
                    b,
                    se,
                    lo,
                    hi,
                    covered,
                    rec.error.clone().unwrap_or_default(),
                ])?;
            }
            Ok(())
        })?,
        Format::Table => {
            let s = &r.summary;
            let mut t = String::new();
            writeln!(
                t,
                "{} on {} (n = {}, p = {}, seed = {}), {} replicates, true beta = {}",
                r.estimator,
                r.spec.config.name(),
                r.spec.n,
                r.spec.p,
                r.spec.seed,
                r.replicates,
                r.true_beta
            )?;
            for (k, v) in [("mse", s.mse), ("bias", s.bias), ("cp", s.cp), ("sd", s.sd), ("mean se", s.mean_se)] {
                writeln!(t, "  {k:<9}{v:>10.4}")?;
            }
            writeln!(t, "  {:<9}{:>10}", "ok", s.succeeded)?;
            writeln!(t, "  {:<9}{:>10}", "failed", s.failed)?;
            writeln!(
                t,
                "  runtime {:.1} s total, {:.2} s per fit",
                r.runtime.total_secs, r.runtime.mean_fit_secs
            )?;
            t
        }
    })
}

/// `replicate,beta_hat,ci_low,ci_high` rows for external plotting.
/// Failed replicates are left out.
pub fn plot_data(r: &SimReport) -> Result<String> {
    csv_string(|w| {
        w.write_record(["replicate", "beta_hat", "ci_low", "ci_high"])?;
        for rec in &r.records {
            if let Some(e) = &rec.estimate {
                w.write_record([rec.replicate.to_string(), num(e.beta_hat), num(e.ci_low), num(e.ci_high)])?;
            }
        }
        Ok(())
    })
}

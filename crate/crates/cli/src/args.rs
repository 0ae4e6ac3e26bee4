//! Command-line flags, the optional TOML settings file, and their merge.
//! A flag given on the command line wins over the same key in the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lplm_core::dml::{DmlConfig, LearnerChoice, RVariant};
use lplm_core::hd::HdConfig;
use lplm_core::learners::LearnerSpec;
use lplm_core::sim::Config;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "lplm", version, about = "Debiased inference for the exposure effect in logistic partially linear models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the calibrated high-dimensional estimator to a data file.
    FitHd(FitArgs),
    /// Fit the cross-fitted machine-learning estimator to a data file.
    FitDml(FitArgs),
    /// Monte Carlo replicates on a built-in design.
    Simulate(SimArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    JsonRecord,
    Table,
    CsvRecords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Hd,
    Dml,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML file supplying any of these flags, plus [hd] and [dml] tables.
    #[arg(long)]
    pub config_file: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replicates, folds and bootstrap draws.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write results here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Learner kind for every nuisance of the DML estimator.
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub k_outer: Option<usize>,
    #[arg(long)]
    pub k_inner: Option<usize>,
    #[arg(long, value_parser = ["difference", "ratio"])]
    pub r_variant: Option<String>,
    #[arg(long)]
    pub bootstrap_draws: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Comma-separated data file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Binary response column.
    #[arg(long)]
    pub y: Option<String>,
    /// Exposure column.
    #[arg(long)]
    pub a: Option<String>,
    /// Covariate columns as a comma-separated list, or `rest`.
    #[arg(long)]
    pub x: Option<String>,
    /// Add pairwise products and natural-spline columns for continuous covariates.
    #[arg(long)]
    pub expand_basis: bool,
    /// Drop controls at random until the case fraction reaches this value.
    #[arg(long)]
    pub downsample_prevalence: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Design: hd-i, hd-ii, hd-iii or ml.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Also write `replicate,beta_hat,ci_low,ci_high` rows to this file.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Columns {
    List(Vec<String>),
    Text(String),
}

/// Contents of `--config-file`. Keys mirror the long flags with
/// underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub y: Option<String>,
    pub a: Option<String>,
    pub x: Option<Columns>,
    pub expand_basis: Option<bool>,
    pub downsample_prevalence: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub learner: Option<String>,
    pub k_outer: Option<usize>,
    pub k_inner: Option<usize>,
    pub r_variant: Option<RVariant>,
    pub bootstrap_draws: Option<usize>,
    pub config: Option<String>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub reps: Option<usize>,
    pub estimator: Option<EstimatorKind>,
    pub emit_plot_data: Option<PathBuf>,
    pub hd: Option<HdConfig>,
    pub dml: Option<DmlConfig>,
}

pub fn read_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

/// Settings shared by every command after the merge.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub hd: HdConfig,
    pub dml: DmlConfig,
}

pub fn merge_common(c: &Common, f: &FileConfig) -> Result<Settings> {
    let seed = c.seed.or(f.seed).unwrap_or(0);
    let mut hd = f.hd.clone().unwrap_or_default();
    let mut dml = f.dml.clone().unwrap_or_default();
    if let Some(kind) = c.learner.as_deref().or(f.learner.as_deref()) {
        let choice = LearnerChoice::One(LearnerSpec::from_kind(kind)?);
        dml.learner_m = choice.clone();
        dml.learner_full = choice.clone();
        dml.learner_a = choice.clone();
        dml.learner_t = choice;
    }
    if let Some(k) = c.k_outer.or(f.k_outer) {
        dml.k_outer = k;
    }
    if let Some(k) = c.k_inner.or(f.k_inner) {
        dml.k_inner = k;
    }
    let variant = match &c.r_variant {
        Some(v) => Some(v.parse()?),
        None => f.r_variant,
    };
    if let Some(v) = variant {
        dml.r_variant = v;
    }
    if let Some(b) = c.bootstrap_draws.or(f.bootstrap_draws) {
        hd.bootstrap_draws = b;
        dml.bootstrap_draws = b;
    }
    hd.seed = seed;
    dml.seed = seed;
    hd.validate()?;
    dml.validate()?;
    let threads = c.threads.or(f.threads);
    if threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    Ok(Settings {
        seed,
        threads,
        output: c.output.clone().or_else(|| f.output.clone()),
        format: c.format.or(f.format).unwrap_or(Format::JsonRecord),
        hd,
        dml,
    })
}

#[derive(Debug, Clone)]
pub struct FitSettings {
    pub input: PathBuf,
    pub y: String,
    pub a: String,
    pub x: Option<Vec<String>>,
    pub expand_basis: bool,
    pub downsample_prevalence: Option<f64>,
    pub common: Settings,
}

fn parse_columns(c: Columns) -> Option<Vec<String>> {
    let list = match c {
        Columns::List(v) => v,
        Columns::Text(t) if t.trim() == "rest" => return None,
        Columns::Text(t) => t.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
    };
    Some(list)
}

pub fn merge_fit(args: &FitArgs) -> Result<FitSettings> {
    let f = read_file_config(args.common.config_file.as_deref())?;
    let common = merge_common(&args.common, &f)?;
    let input = args.input.clone().or_else(|| f.input.clone()).context("--input is required")?;
    if !input.is_file() {
        bail!("input file {} does not exist", input.display());
    }
    let x = match args.x.clone().map(Columns::Text).or_else(|| f.x.clone()) {
        Some(c) => parse_columns(c),
        None => None,
    };
    Ok(FitSettings {
        input,
        y: args.y.clone().or_else(|| f.y.clone()).unwrap_or_else(|| "y".into()),
        a: args.a.clone().or_else(|| f.a.clone()).unwrap_or_else(|| "a".into()),
        x,
        expand_basis: args.expand_basis || f.expand_basis.unwrap_or(false),
        downsample_prevalence: args.downsample_prevalence.or(f.downsample_prevalence),
        common,
    })
}

#[derive(Debug, Clone)]
pub struct SimSettings {
    pub config: Config,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub estimator: EstimatorKind,
    pub emit_plot_data: Option<PathBuf>,
    pub common: Settings,
}

pub fn merge_sim(args: &SimArgs) -> Result<SimSettings> {
    let f = read_file_config(args.common.config_file.as_deref())?;
    let common = merge_common(&args.common, &f)?;
    let config: Config = args.config.clone().or_else(|| f.config.clone()).unwrap_or_else(|| "hd-i".into()).parse()?;
    let estimator = args.estimator.or(f.estimator).unwrap_or(match config {
        Config::Ml => EstimatorKind::Dml,
        _ => EstimatorKind::Hd,
    });
    Ok(SimSettings {
        config,
        n: args.n.or(f.n).unwrap_or(1000),
        p: args.p.or(f.p).unwrap_or(config.default_p()),
        reps: args.reps.or(f.reps).unwrap_or(300),
        estimator,
        emit_plot_data: args.emit_plot_data.clone().or_else(|| f.emit_plot_data.clone()),
        common,
    })
}

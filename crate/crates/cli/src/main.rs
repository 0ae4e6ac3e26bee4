mod args;
mod output;
mod run;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

const USAGE: u8 = 1;
const RUNTIME: u8 = 2;

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("building the thread pool")?;
    }
    Ok(())
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn fail(code: u8, err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(code)
}

fn fit_command(name: &str, a: &args::FitArgs) -> ExitCode {
    let s = match args::merge_fit(a) {
        Ok(s) => s,
        Err(e) => return fail(USAGE, e),
    };
    let result = init_threads(s.common.threads)
        .and_then(|_| run::fit(name, &s))
        .and_then(|r| output::render_fit(&r, s.common.format))
        .and_then(|text| emit(&text, s.common.output.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(RUNTIME, e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::FitHd(a) => fit_command("fit-hd", &a),
        Command::FitDml(a) => fit_command("fit-dml", &a),
        Command::Simulate(a) => {
            let s = match args::merge_sim(&a) {
                Ok(s) => s,
                Err(e) => return fail(USAGE, e),
            };
            let result = init_threads(s.common.threads).and_then(|_| run::simulate(&s)).and_then(|r| {
                if let Some(p) = &s.emit_plot_data {
                    emit(&output::plot_data(&r)?, Some(p))?;
                }
                emit(&output::render_sim(&r, s.common.format)?, s.common.output.as_deref())
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(RUNTIME, e),
            }
        }
    }
}

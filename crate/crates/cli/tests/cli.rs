use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lplm_core::data::write_delimited;
use lplm_core::sim::{generate, Config, GeneratorSpec};
use serde_json::Value;

fn lplm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lplm")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn hd_data(dir: &Path, n: usize, p: usize) -> PathBuf {
    let g = generate(&GeneratorSpec::new(Config::HdI, n, 3).with_p(p)).unwrap();
    let path = dir.join("hd.csv");
    write_delimited(&path, &g.data).unwrap();
    path
}

fn ml_data(dir: &Path, n: usize) -> PathBuf {
    let g = generate(&GeneratorSpec::new(Config::Ml, n, 4)).unwrap();
    let path = dir.join("ml.csv");
    write_delimited(&path, &g.data).unwrap();
    path
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&lplm(&["fit-hd", "--no-such-flag"])), 1);
    assert_eq!(code(&lplm(&["frobnicate"])), 1);
    assert_eq!(code(&lplm(&["simulate", "--format", "yaml"])), 1);
    let o = lplm(&["fit-hd", "--input", "/definitely/not/here.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("does not exist"));
    assert_eq!(code(&lplm(&["--help"])), 0);
    assert_eq!(code(&lplm(&["--version"])), 0);
}

#[test]
fn fit_hd_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = hd_data(dir.path(), 400, 30);
    let input = input.to_str().unwrap();
    let run = |threads: &str| {
        let o = lplm(&["fit-hd", "--input", input, "--y", "y", "--a", "a", "--seed", "7", "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        o.stdout
    };
    let first = run("1");
    assert_eq!(first, run("1"));
    assert_eq!(first, run("3"));

    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: Value = serde_json::from_str(&text).unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
    let beta = v["beta_hat"].as_f64().unwrap();
    assert_eq!(format!("{beta:?}").parse::<f64>().unwrap().to_bits(), beta.to_bits());
    assert_eq!(v["fit"]["beta_hat"], v["beta_hat"]);
    assert_eq!(v["n"], 400);
    assert_eq!(v["p"], 30);
    for stage in ["gamma_tilde", "alpha", "gamma_hat"] {
        assert!(v["fit"]["stages"][stage]["lambda"].as_f64().unwrap() > 0.0);
        assert!(v["fit"]["stages"][stage]["kkt_residual"].is_number());
    }
    assert!(v["fit"]["fold_seed"].is_u64());
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = hd_data(dir.path(), 300, 10);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("input = {:?}\nseed = 11\nformat = \"csv-records\"\n\n[hd]\ngrid_points = 10\n", input.to_str().unwrap()),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = lplm(&["fit-hd", "--config-file", cfg]);
    assert_eq!(code(&from_file), 0, "{}", stderr(&from_file));
    let mut rows = csv::Reader::from_reader(from_file.stdout.as_slice());
    let headers = rows.headers().unwrap().clone();
    let row = rows.records().next().unwrap().unwrap();
    let seed = headers.iter().position(|h| h == "seed").unwrap();
    assert_eq!(&row[seed], "11");

    let o = lplm(&["fit-hd", "--config-file", cfg, "--seed", "12", "--format", "json-record"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 12);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "colour = \"red\"\n").unwrap();
    assert_eq!(code(&lplm(&["fit-hd", "--config-file", bad.to_str().unwrap()])), 1);
}

#[test]
fn schema_mismatch_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = hd_data(dir.path(), 100, 5);
    let o = lplm(&["fit-hd", "--input", input.to_str().unwrap(), "--y", "outcome"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("outcome"), "{}", stderr(&o));
}

#[test]
fn fit_dml_rejects_constant_response() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    let mut text = String::from("y,a,x1,x2\n");
    for i in 0..60 {
        text.push_str(&format!("1,{},{},{}\n", i % 7, (i * 3) % 11, i % 5));
    }
    std::fs::write(&path, text).unwrap();
    let o = lplm(&["fit-dml", "--input", path.to_str().unwrap(), "--learner", "ridge"]);
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    assert!(msg.contains("response is constant"), "{msg}");
    assert!(msg.contains("fit-dml"), "{msg}");
}

#[test]
fn fit_dml_output_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let input = ml_data(dir.path(), 300);
    let input = input.to_str().unwrap();
    let run = |threads: &str| {
        let o = lplm(&[
            "fit-dml", "--input", input, "--learner", "ridge", "--k-outer", "3", "--k-inner", "3", "--seed", "5",
            "--threads", threads,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        o.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let v: Value = serde_json::from_slice(&one).unwrap();
    assert_eq!(v["fit"]["folds"].as_array().unwrap().len(), 3);
    assert_eq!(v["fit"]["folds"][0]["learner_m"], "penalized-linear");
}

#[test]
fn simulate_records_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let out = dir.path().join("report.json");
    let args = |threads: &'static str, out: &Path| {
        lplm(&[
            "simulate", "--config", "hd-i", "--n", "200", "--p", "20", "--reps", "3", "--seed", "2", "--threads", threads,
            "--bootstrap-draws", "0", "--output", out.to_str().unwrap(), "--emit-plot-data", plot.to_str().unwrap(),
        ])
    };
    let o = args("1", &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = std::fs::read(&out).unwrap();
    let out2 = dir.path().join("report2.json");
    assert_eq!(code(&args("2", &out2)), 0);
    assert_eq!(first, std::fs::read(&out2).unwrap());

    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["replicates"], 3);
    assert_eq!(v["estimator"], "hd");
    assert_eq!(v["records"].as_array().unwrap().len(), 3);
    for key in ["mse", "bias", "cp"] {
        assert!(v["summary"][key].is_number());
    }
    assert!(v.get("runtime").is_none());

    let mut plot_rows = csv::Reader::from_path(&plot).unwrap();
    assert_eq!(plot_rows.headers().unwrap(), vec!["replicate", "beta_hat", "ci_low", "ci_high"]);
    let rows: Vec<_> = plot_rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (r, rec) in rows.iter().zip(v["records"].as_array().unwrap()) {
        let b: f64 = r[1].parse().unwrap();
        assert_eq!(b.to_bits(), rec["estimate"]["beta_hat"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn table_format_shows_runtime() {
    let o = lplm(&[
        "simulate", "--config", "hd-i", "--n", "200", "--p", "10", "--reps", "2", "--bootstrap-draws", "0", "--format",
        "table",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("runtime"));
    assert!(text.contains("cp"));
}

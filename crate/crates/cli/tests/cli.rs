//! CLI surface checks: exit codes, verdicts, artifact round-trips between
//! producer and consumer subcommands, and the sweep runner.

use std::path::{Path, PathBuf};
use std::process::Command;

fn omd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omd"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("omd-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_code_2() {
    let out = omd().arg("no-such-subcommand").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = omd().args(["sample-prior", "--family", "omd"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing required flags");
}

#[test]
fn runtime_errors_exit_with_code_1() {
    let out = omd()
        .args([
            "check-order",
            "--matrix",
            "/nonexistent/path/matrix.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn check_order_verdicts() {
    let dir = tempdir("verdict");
    let id = dir.join("identity.csv");
    std::fs::write(&id, "1.0,0.0\n0.0,1.0\n").unwrap();
    let stdout = assert_ok(omd().args(["check-order", "--matrix"]).arg(&id));
    assert!(stdout.contains("ordered"));
    let swapped = dir.join("swapped.csv");
    std::fs::write(&swapped, "0.0,1.0\n1.0,0.0\n").unwrap();
    let stdout = assert_ok(omd().args(["check-order", "--matrix"]).arg(&swapped));
    assert!(stdout.contains("not ordered"));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn sampled_priors_pass_check_order() {
    let dir = tempdir("pipeline");
    let m = dir.join("m.csv");
    assert_ok(
        omd()
            .args([
                "sample-prior",
                "--family",
                "omd",
                "--states",
                "3",
                "--alpha",
                "1,1,1,1",
                "--seed",
                "7",
                "--out",
            ])
            .arg(&m),
    );
    let stdout = assert_ok(omd().args(["check-order", "--matrix"]).arg(&m));
    assert_eq!(stdout.trim(), "ordered");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn events_round_trip_through_ingest() {
    let dir = tempdir("events");
    assert_ok(
        omd()
            .args([
                "generate-synthetic",
                "--model",
                "dpt",
                "--countries",
                "4",
                "--communities",
                "2",
                "--states",
                "2",
                "--actions",
                "6",
                "--steps",
                "3",
                "--seed",
                "5",
                "--out-dir",
            ])
            .arg(&dir),
    );
    let countries = "C000,C001,C002,C003";
    assert_ok(
        omd()
            .args([
                "ingest-events",
                "--countries",
                countries,
                "--start",
                "2019-01",
                "--months",
                "3",
                "--actions",
                "6",
                "--input",
            ])
            .arg(dir.join("events.tsv"))
            .arg("--out")
            .arg(dir.join("reingested.csv")),
    );
    let strip_header = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        let mut rows: Vec<String> = text.lines().skip(1).map(str::to_string).collect();
        rows.sort();
        rows
    };
    assert_eq!(
        strip_header(&dir.join("tensor.csv")),
        strip_header(&dir.join("reingested.csv"))
    );
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn fit_then_evaluate_smoke_produces_finite_metrics() {
    let dir = tempdir("smoke");
    assert_ok(
        omd()
            .args([
                "generate-synthetic",
                "--model",
                "hmm",
                "--shape",
                "banded",
                "--states",
                "3",
                "--actions",
                "5",
                "--sequences",
                "20",
                "--steps",
                "8",
                "--seed",
                "3",
                "--out-dir",
            ])
            .arg(&dir),
    );
    assert_ok(
        omd()
            .args([
                "fit",
                "--model",
                "hmm",
                "--states",
                "3",
                "--prior",
                "smd+smd",
                "--split",
                "imputation",
                "--samples",
                "10",
                "--burn-in",
                "10",
                "--thin",
                "2",
                "--seed",
                "4",
                "--data",
            ])
            .arg(dir.join("sequences.csv"))
            .arg("--out")
            .arg(dir.join("trace.jsonl")),
    );
    assert_ok(
        omd()
            .args(["evaluate", "--trace"])
            .arg(dir.join("trace.jsonl"))
            .arg("--data")
            .arg(dir.join("sequences.csv"))
            .arg("--truth-emission")
            .arg(dir.join("truth_emission.csv"))
            .arg("--truth-transition")
            .arg(dir.join("truth_transition.csv"))
            .arg("--truth-states")
            .arg(dir.join("states.csv"))
            .arg("--out")
            .arg(dir.join("metrics.csv")),
    );
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("experiment,seed,prior,split,metric,value\n"));
    let mut rows = 0;
    for line in metrics.lines().skip(1) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value.is_finite(), "{line}");
        rows += 1;
    }
    assert!(rows >= 3, "{metrics}");
    assert_ok(
        omd()
            .args(["summarize-posterior", "--trace"])
            .arg(dir.join("trace.jsonl"))
            .arg("--out-dir")
            .arg(dir.join("summary")),
    );
    assert!(dir.join("summary/emission_mean.csv").exists());
    assert!(dir.join("summary/transition_mean.csv").exists());
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn run_experiment_writes_plot_ready_csv() {
    let dir = tempdir("sweep");
    let config = "\
id = smoke
model = hmm
truth = banded
states = 3
actions = 5
sequences = 12
steps = 6
seeds = 1,2
split = forecasting
priors = omd+omd,smd+smd
samples = 6
burn_in = 6
thin = 2
chains = 1
";
    let cfg = dir.join("sweep.cfg");
    std::fs::write(&cfg, config).unwrap();
    assert_ok(
        omd()
            .args(["run-experiment", "--threads", "2", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join("metrics.csv")),
    );
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.contains("omd+omd"));
    assert!(metrics.contains(",mean,") || metrics.contains("mean,omd"));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn output_dir_env_var_resolves_relative_paths() {
    let dir = tempdir("envvar");
    assert_ok(
        omd()
            .env("OMD_OUTPUT_DIR", &dir)
            .args([
                "sample-prior",
                "--family",
                "smd",
                "--states",
                "2",
                "--alpha",
                "1,1",
                "--seed",
                "9",
                "--out",
                "relative.csv",
            ]),
    );
    assert!(dir.join("relative.csv").exists());
    let _ = std::fs::remove_dir_all(dir);
}

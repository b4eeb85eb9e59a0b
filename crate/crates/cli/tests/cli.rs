use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stochlab::run_args;

fn stochlab(args: &[&str], seed_env: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stochlab"));
    cmd.args(args).current_dir(dir).env_remove("STOCHLAB_SEED");
    if let Some(seed) = seed_env {
        cmd.env("STOCHLAB_SEED", seed);
    }
    cmd.output().expect("spawn stochlab")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON record")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn passing_run_exits_zero_with_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochlab(
        &["fomin", "--net", &fixture("grid3.txt"), "--Lmax", "14"],
        None,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["command"], "fomin");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config"]["seed"], 0);
    assert_eq!(r["config"]["params"]["Lmax"], 14);
    for key in ["det", "brute", "tail_bound"] {
        assert!(r[key].is_f64(), "{key} missing");
    }
}

#[test]
fn tolerance_failure_exits_one_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochlab(&["relax-curve"], None, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("relax-curve.sup_at_u=8"), "{stderr}");
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["bessel-density", "--D=-1"],
        vec!["bessel-density", "--t", "0"],
        vec!["bessel-density", "--no-such-flag", "1"],
        vec!["no-such-command"],
        vec!["fomin", "--net", "missing.txt"],
        vec!["relax-curve", "--csv", "x.csv", "--workers", "0"],
    ] {
        let out = stochlab(&args, None, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn config_file_rejects_unknown_keys_and_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"chains": 5, "bogus": 1}"#).unwrap();
    let out = stochlab(&["sle-swallow", "--config", "bad.json"], None, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    std::fs::write(
        dir.path().join("good.json"),
        r#"{"seed": 11, "params": {"chains": 5, "dt": 1e-3}}"#,
    )
    .unwrap();
    let out = stochlab(
        &[
            "sle-swallow",
            "--config",
            "good.json",
            "--chains",
            "50",
            "--seed",
            "3",
        ],
        None,
        dir.path(),
    );
    let r = json(&out);
    assert_eq!(r["config"]["seed"], 11);
    assert_eq!(r["config"]["params"]["chains"], 5);
    assert_eq!(r["rows"][0]["chains"], 5);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["charpoly", "--samples", "2000", "--timeshift-samples", "0"];
    let from_env = stochlab(&args, Some("42"), dir.path());
    assert_eq!(json(&from_env)["config"]["seed"], 42);
    let mut explicit: Vec<&str> = args.to_vec();
    explicit.extend(["--seed", "42"]);
    let from_flag = stochlab(&explicit, Some("7"), dir.path());
    assert_eq!(from_env.stdout, from_flag.stdout);
    let default = stochlab(&args, None, dir.path());
    assert_eq!(json(&default)["config"]["seed"], 0);
    assert_ne!(json(&default)["mc"], json(&from_env)["mc"]);
}

#[test]
fn reruns_are_byte_identical_and_worker_count_is_immaterial() {
    let dir = tempfile::tempdir().unwrap();
    let args = |workers: &'static str| {
        vec![
            "dyson-compare",
            "--N",
            "2",
            "--samples",
            "3000",
            "--seed",
            "5",
            "--workers",
            workers,
        ]
    };
    let a = stochlab(&args("1"), None, dir.path());
    let b = stochlab(&args("1"), None, dir.path());
    assert_eq!(a.stdout, b.stdout);
    let c = stochlab(&args("3"), None, dir.path());
    let (mut ra, mut rc) = (json(&a), json(&c));
    assert_eq!(rc["config"]["workers"], 3);
    ra["config"]["workers"] = Value::Null;
    rc["config"]["workers"] = Value::Null;
    assert_eq!(ra, rc);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let o = run_args(["bessel-density", "--points", "3"]).unwrap();
    assert!(o.json.contains("\"x\":1.0000000000000000e0"), "{}", o.json);
    let t = o.table.unwrap();
    let first = t.lines().nth(1).unwrap();
    for field in first.split(',') {
        let mantissa = field.split('e').next().unwrap();
        assert_eq!(
            mantissa.trim_start_matches('-').replace('.', "").len(),
            17,
            "{field}"
        );
    }
}

#[test]
fn output_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochlab(
        &[
            "sle-trace",
            "--D",
            "3",
            "--dt",
            "1e-2",
            "--seed",
            "1",
            "--csv",
            "trace.csv",
            "--plot",
            "dh.csv",
            "--out",
            "run.json",
        ],
        None,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(trace.as_bytes());
    assert_eq!(reader.headers().unwrap(), vec!["t", "re", "im"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 101);
    assert_eq!(&rows[0][1], "0.0000000000000000e0");
    let plot = std::fs::read_to_string(dir.path().join("dh.csv")).unwrap();
    assert!(plot.starts_with("x,y,yerr\n"));
    let record = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
    assert_eq!(record.trim_end().as_bytes(), out.stdout.trim_ascii_end());
    assert_eq!(json(&out)["phase"], "simple");
}

#[test]
fn requesting_missing_outputs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochlab(
        &[
            "sle-swallow",
            "--chains",
            "2",
            "--dt",
            "1e-2",
            "--plot",
            "p.csv",
        ],
        None,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cardy_record_has_the_documented_fields() {
    let o = run_args([
        "cardy",
        "--paths",
        "400",
        "--control-paths",
        "0",
        "--seed",
        "7",
        "--curve-points",
        "9",
    ])
    .unwrap();
    let r = o.record();
    for key in ["exact", "mc", "stderr", "pass"] {
        assert!(!r[key].is_null(), "{key} missing");
    }
    assert!((r["exact"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let plot = o.plot.unwrap();
    assert_eq!(plot.lines().count(), 10);
}

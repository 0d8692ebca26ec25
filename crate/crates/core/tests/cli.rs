use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn majorana(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majorana")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = majorana(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn fidelity_curve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    run_ok(&["fidelity-curve", "--n", "6", "--mu", "0.1", "--t-max", "4", "--grid-points", "5", "--out", &out]);
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let fidelity = headers.iter().position(|h| h == "fidelity").unwrap();
    let records: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 5);
    assert_eq!(records[0][fidelity].parse::<f64>().unwrap(), 1.0);
    assert!(dir.path().join("manifest.json").exists());
    assert!(fs::read_dir(dir.path().join("plots")).unwrap().count() >= 1);
}

#[test]
fn oracle_check_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    run_ok(&[
        "oracle-check",
        "--n",
        "3,5",
        "--mu",
        "0.4",
        "--eta",
        "0.2",
        "--disorder",
        "uniform",
        "--realizations",
        "2",
        "--times",
        "0,1.5,4",
        "--out",
        &out,
    ]);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"command\": \"fidelity-curve\",\n  \"mu\": [0.1],\n  \"grid\": 5\n}\n").unwrap();
    let out = majorana(&["--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");

    let out = majorana(&["storage-scaling", "--f0", "1.5", "--out", &out_arg(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_independent_of_workers_and_reproducible_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str, workers: &str| {
        vec![
            "storage-scaling".to_string(),
            "--n=10,14".into(),
            "--mu=0.5".into(),
            "--eta=0.25".into(),
            "--disorder=uniform".into(),
            "--seed=11".into(),
            "--estimator=monte-carlo".into(),
            "--samples=200".into(),
            "--realizations=2".into(),
            "--f0=0.96".into(),
            "--t-max=60".into(),
            "--grid-points=16".into(),
            format!("--workers={workers}"),
            format!("--out={out}"),
        ]
    };
    let one = dir.path().join("one");
    let three = dir.path().join("three");
    for (path, w) in [(&one, "1"), (&three, "3")] {
        let a = args(path.to_str().unwrap(), w);
        run_ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let csv_one = fs::read(one.join("results.csv")).unwrap();
    assert_eq!(csv_one, fs::read(three.join("results.csv")).unwrap());

    let again = dir.path().join("again");
    run_ok(&["--config", one.join("manifest.json").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(csv_one, fs::read(again.join("results.csv")).unwrap());
}

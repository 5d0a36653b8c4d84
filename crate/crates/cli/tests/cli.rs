use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ni(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ni")).args(args).current_dir(cwd).output().expect("spawn ni")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&ni(&["gen", "--problem", "prp", "--n", "20", "--seed", "7", "--out", "a.json"], dir.path()));
    ok(&ni(&["gen", "--problem", "prp", "--n", "20", "--seed", "7", "--out", "b.json"], dir.path()));
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    ok(&ni(&["gen", "--problem", "prp", "--n", "20", "--seed", "8", "--out", "c.json"], dir.path()));
    assert_ne!(a, fs::read(dir.path().join("c.json")).unwrap());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn solve_lolib_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("toy instance\n12\n");
    for i in 0..12 {
        let row: Vec<String> = (0..12).map(|j| if i == j { 0 } else { (i * 7 + j * 13) % 19 }.to_string()).collect();
        text += &row.join(" ");
        text.push('\n');
    }
    fs::write(dir.path().join("toy.lol"), text).unwrap();
    let out = ok(&ni(
        &["solve", "--instance", "toy.lol", "--algo", "sahc", "--budget-evals", "2000", "--out-dir", "s"],
        dir.path(),
    ));
    assert!(out.starts_with("objective"));
    let trace = fs::read_to_string(dir.path().join("s/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("evals,seconds,best,current"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 1);
    for w in rows.windows(2) {
        assert!(w[1][2] >= w[0][2] && w[1][0] >= w[0][0]);
        assert_eq!(w[1][1], 0.0);
    }
    assert!(rows.last().unwrap()[0] <= 2000.0);
}

#[test]
fn compensation_prints_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&ni(
        &["compensation", "--t-train", "72000", "--t-neigh", "0.40", "--t-infer", "0.0046", "--steps", "1000"],
        dir.path(),
    ));
    assert_eq!(out.trim(), "183");
    let bad = ni(&["compensation", "--t-train", "1", "--t-neigh", "0.01", "--t-infer", "0.02"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ni(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(ni(&["gen", "--problem", "prp", "--bogus"], dir.path()).status.code(), Some(1));
    let no_model = ni(&["eval-one-step", "--problem", "prp", "--n", "6", "--out-dir", "o"], dir.path());
    assert_eq!(no_model.status.code(), Some(1));
}

#[test]
fn missing_reference_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bk.csv"), "instance,value\n0,10\n").unwrap();
    let out = ni(
        &["bench-bicriteria", "--problem", "prp", "--n", "14", "--count", "3", "--algos", "bfhc", "--reference", "bk.csv", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("best-known"));
}

fn replay_matches(args: &[&str], files: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    ok(&ni(args, dir.path()));
    ok(&ni(&["run", "--manifest", "first/manifest.json", "--out-dir", "second"], dir.path()));
    for f in files {
        let a = fs::read(dir.path().join("first").join(f)).unwrap();
        let b = fs::read(dir.path().join("second").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs after replay");
    }
}

#[test]
fn manifests_replay_bitwise() {
    replay_matches(
        &["bench-bicriteria", "--problem", "prp", "--n", "8", "--count", "12", "--algos", "bfhc,sahc,shc", "--out-dir", "first"],
        &["runs.csv", "summary.csv"],
    );
    replay_matches(
        &[
            "bench-budget-table", "--problem", "gpp", "--sizes", "10,12", "--multipliers", "10,100", "--count", "4",
            "--algos", "msbfhc,msshc,bfts,bfils", "--reference", "incumbent", "--out-dir", "first",
        ],
        &["runs.csv", "summary.csv", "table.csv"],
    );
    replay_matches(
        &["eval-one-step", "--policy", "uniform", "--problem", "tsp", "--n", "9", "--count", "30", "--out-dir", "first"],
        &["one_step.csv", "histogram.csv", "summary.csv"],
    );
    replay_matches(
        &["train", "--problem", "prp", "--n", "6", "--d", "8", "--layers", "1", "--epochs", "2", "--batch", "4", "--out-dir", "first"],
        &["train_log.csv", "model.ckpt"],
    );
}

#[test]
fn trained_model_drives_search() {
    let dir = tempfile::tempdir().unwrap();
    ok(&ni(
        &["train", "--problem", "tsp", "--n", "8", "--d", "8", "--layers", "2", "--epochs", "2", "--batch", "4", "--out-dir", "m"],
        dir.path(),
    ));
    let log = fs::read_to_string(dir.path().join("m/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    ok(&ni(&["gen", "--problem", "tsp", "--n", "12", "--seed", "3", "--out", "t.json"], dir.path()));
    for algo in ["nhc", "nts", "nils", "msnhc"] {
        ok(&ni(
            &["solve", "--instance", "t.json", "--algo", algo, "--model", "m/model.ckpt", "--budget-evals", "300", "--out-dir", algo],
            dir.path(),
        ));
    }
    ok(&ni(
        &["eval-multi-step", "--model", "m/model.ckpt", "--problem", "tsp", "--n", "8", "--steps", "5", "--runs", "3", "--out-dir", "ms"],
        dir.path(),
    ));
    let rows = fs::read_to_string(dir.path().join("ms/multi_step.csv")).unwrap();
    assert_eq!(rows.lines().count(), 16);
    for l in rows.lines().skip(1) {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[4] <= v[3] + 1e-9 && v[3] <= v[5] + 1e-9);
    }
    // a PRP model must not be accepted for a TSP instance
    ok(&ni(&["gen", "--problem", "prp", "--n", "8", "--seed", "3", "--out", "p.json"], dir.path()));
    let bad = ni(&["solve", "--instance", "p.json", "--algo", "nhc", "--model", "m/model.ckpt", "--out-dir", "x"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

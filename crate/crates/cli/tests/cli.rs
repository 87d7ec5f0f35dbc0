use std::fs;
use std::process::Command;

fn symbreak() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symbreak"))
}

const TINY: &str = r#"{
  "dataset": "synth-regression",
  "synth": { "n": 300, "d": 3 },
  "hidden_dims": [8],
  "sizes": [2, 4],
  "repetitions": 2,
  "record_wall_time": false,
  "train": { "max_epochs": 5 }
}"#;

#[test]
fn selftest_passes() {
    let out = symbreak().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn gradcheck_passes() {
    let out = symbreak().args(["gradcheck", "--cases", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = symbreak()
        .args(["train", "deep-ensemble", "--config"])
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad_sizes = symbreak().args(["train", "moe", "--sizes", "4,8"]).output().unwrap();
    assert_eq!(bad_sizes.status.code(), Some(2));
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"unknown_field": 1}"#).unwrap();
    let unknown = symbreak().args(["train", "moe", "--config"]).arg(&p).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = symbreak()
        .args(["train", "deep-ensemble", "--dataset", "otto", "--data-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(2));
}

#[test]
fn train_then_report_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, TINY).unwrap();
    let run = |out: &std::path::Path, workers: &str| {
        let st = symbreak()
            .args(["train", "deep-ensemble", "--workers", workers, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(st.success());
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a, "1");
    run(&b, "3");
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results, fs::read_to_string(b.join("results.csv")).unwrap());
    // header + 2 modes * 2 reps * (4 singles + 2 ensembles)
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 6);
    assert!(a.join("config.json").exists());
    assert!(a.join("synth-regression_h8.svg").exists());

    let aggregate = fs::read_to_string(a.join("aggregate.csv")).unwrap();
    fs::remove_file(a.join("aggregate.csv")).unwrap();
    let st = symbreak().args(["report", "--in"]).arg(&a).status().unwrap();
    assert!(st.success());
    assert_eq!(fs::read_to_string(a.join("aggregate.csv")).unwrap(), aggregate);
}

#[test]
fn mixture_run_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("m");
    let st = symbreak()
        .args(["train", "gg-moe", "--modes", "wmlp", "--hidden-dim", "8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
    assert!(results.lines().skip(1).all(|l| l.contains("GGMoE-WMLP")));
}

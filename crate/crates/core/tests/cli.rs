//! End-to-end runs of the `emest` binary.

use std::path::Path;
use std::process::{Command, Output};

use emest::io::read_dataset;

fn emest(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emest"))
        .args(args)
        .current_dir(dir)
        .env("EMEST_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("error object on stderr")
}

#[test]
fn generate_estimate_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let gen = emest(
        &[
            "generate",
            "--dim",
            "4",
            "--n",
            "10000",
            "--alpha",
            "0.4",
            "--adversary",
            "isotropic:400",
            "--seed",
            "3",
            "--mean",
            "1,-2,0.5,4",
            "--out",
            "data.csv",
        ],
        p,
    );
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let data = read_dataset(&p.join("data.csv")).unwrap();
    assert_eq!(data.truth().unwrap().mean.as_slice(), &[1.0, -2.0, 0.5, 4.0]);

    std::fs::write(
        p.join("run.json"),
        r#"{"alpha": 0.4, "dataset": "data.csv", "seed": 5, "out": "report.json"}"#,
    )
    .unwrap();
    let est = emest(&["estimate", "run.json"], p);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&est)).unwrap();
    let err = report["l2_error"].as_f64().unwrap();
    assert!(err.is_finite() && err < 2.0, "error {err}");
    for field in ["estimate", "trace", "recursion_log", "seeds", "config_echo"] {
        assert!(report.get(field).is_some(), "missing {field}");
    }
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
    assert_eq!(written, report);

    let score = emest(&["score", "report.json", "data.csv"], p);
    assert!(score.status.success());
    let scored: f64 = stdout(&score).trim().parse().unwrap();
    assert!((scored - err).abs() <= 1e-10 * err.max(1.0));
}

#[test]
fn estimate_is_deterministic_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("run.json"),
        r#"{"alpha": 1.0, "generate": {"dim": 4, "n": 10000, "adversary": "identity", "seed": 2}}"#,
    )
    .unwrap();
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
        v.as_object_mut().unwrap().remove("wall_ms");
        v
    };
    let a = emest(&["estimate", "run.json", "--seed", "9"], p);
    let b = emest(&["estimate", "run.json", "--seed", "9"], p);
    assert!(a.status.success());
    assert_eq!(strip(&a), strip(&b));
    assert!(strip(&a)["l2_error"].as_f64().unwrap().is_finite());
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("bad.json"),
        r#"{"generate": {"dim": 4, "n": 1000, "adversary": "identity"}}"#,
    )
    .unwrap();
    let out = emest(&["estimate", "bad.json"], p);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["code"], 2);
    assert!(e["error"]["message"].as_str().unwrap().contains("alpha"));

    std::fs::write(p.join("missing.json"), r#"{"alpha": 0.5, "dataset": "nope.csv"}"#).unwrap();
    assert_eq!(emest(&["estimate", "missing.json"], p).status.code(), Some(2));
}

#[test]
fn infeasible_n_exits_3_with_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("small.json"),
        r#"{"alpha": 0.5, "generate": {"dim": 16, "n": 50, "adversary": "identity"}}"#,
    )
    .unwrap();
    let out = emest(&["estimate", "small.json"], p);
    assert_eq!(out.status.code(), Some(3));
    let msg = error_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("minimal feasible N = 90"), "{msg}");
}

#[test]
fn score_offsets_and_missing_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mean = "0.5,-1,2,0";
    for (name, truth) in [("t.csv", true), ("nt.csv", false)] {
        let mut args = vec![
            "generate", "--dim", "4", "--n", "20", "--alpha", "1", "--mean", mean, "--out", name,
        ];
        if !truth {
            args.push("--no-truth");
        }
        assert!(emest(&args, p).status.success());
    }
    for (est, want) in [
        ("0.5,-1,2,0", "0.00000000000"),
        ("1.5,-1,2,0", "1.00000000000"),
        ("[3.5, 3, 2, 0]", "5.00000000000"),
    ] {
        std::fs::write(p.join("e.txt"), est).unwrap();
        let out = emest(&["score", "e.txt", "t.csv"], p);
        assert!(out.status.success());
        assert_eq!(stdout(&out).trim(), want);
    }
    let out = emest(&["score", "e.txt", "nt.csv"], p);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn sweep_rows_header_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("sweep.json"),
        r#"{"dims": [4], "ns": [5000], "alphas": [0.3], "adversaries": ["isotropic:10000"], "trials": 3,
            "estimators": ["entangled", "sample_mean"], "root_seed": 11, "out": "rows.csv"}"#,
    )
    .unwrap();
    let out = emest(&["sweep", "sweep.json"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(p.join("rows.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("D,N,alpha,adversary,estimator,trial,seed,l2_error,ms,notes")
    );
    assert_eq!(lines.count(), 6);

    let over = emest(&["sweep", "sweep.json", "--out", "other.csv"], p);
    assert!(over.status.success());
    assert_eq!(std::fs::read_to_string(p.join("other.csv")).unwrap(), csv);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = emest(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}

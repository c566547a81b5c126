//! The `werm` binary: outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn werm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_werm")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Two-class blobs with four strata, `x0,x1,y,s`.
fn write_blobs(path: &Path, n: usize, shift: f64) {
    let mut text = String::from("x0,x1,y,s\n");
    for i in 0..n {
        let y = i % 2;
        let c = if y == 1 { shift } else { -shift };
        text.push_str(&format!("{},{},{y},{}\n", c + (i as f64 * 1.3).sin(), (i as f64 * 0.7).cos(), i % 4));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn bounds_prints_terms_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let ok = werm(dir.path(), &["bounds", "--kind", "approx1", "--n", "1000", "--delta", "0.05", "--epsilon", "0.1"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let v = stdout_json(&ok);
    for key in ["value", "valid", "required_n", "terms"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let expected = 2.0 / 0.01 * ((2.0f64 / 0.05).ln() / 2000.0).sqrt();
    assert!((v["value"].as_f64().unwrap() - expected).abs() < 1e-12);

    let bad = werm(dir.path(), &["bounds", "--kind", "approx1", "--n", "1000", "--delta", "1.5", "--epsilon", "0.1"]);
    assert_eq!(code(&bad), 2);
    let unknown = werm(dir.path(), &["bounds", "--kind", "lemma9", "--n", "10", "--delta", "0.1"]);
    assert_eq!(code(&unknown), 2);

    std::fs::write(
        dir.path().join("b.json"),
        r#"{"n": 500, "delta": 0.1, "l": 1.0, "rademacher": 0.05, "phi_sup": 2.0}"#,
    )
    .unwrap();
    let cfg = werm(dir.path(), &["--config", "b.json", "bounds", "--kind", "lemma1"]);
    assert_eq!(code(&cfg), 0);
    assert!(stdout_json(&cfg)["valid"].as_bool().unwrap());
}

#[test]
fn io_failures_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = werm(dir.path(), &["weights", "--in", "missing.csv", "--kind", "none"]);
    assert_eq!(code(&o), 4);
    let o = werm(dir.path(), &["--config", "missing.json", "experiment"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn divergent_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write_blobs(&dir.path().join("d.csv"), 40, 30.0);
    let o = werm(
        dir.path(),
        &[
            "train",
            "--train",
            "d.csv",
            "--test",
            "d.csv",
            "--lr",
            "1e300",
            "--momentum",
            "0",
            "--wd",
            "1",
            "--epochs",
            "3",
        ],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_writes_curve_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_blobs(&dir.path().join("d.csv"), 200, 3.0);
    let o = werm(
        dir.path(),
        &[
            "--out", "run", "--seed", "3", "train", "--train", "d.csv", "--test", "d.csv", "--lr", "0.1", "--epochs",
            "5", "--batch", "20", "--top-k", "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["miss_rate"].as_f64().unwrap() < 0.1);
    let curve = std::fs::read_to_string(dir.path().join("run/learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 6);
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/results.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
}

#[test]
fn biasgen_then_strata_weights() {
    let dir = tempfile::tempdir().unwrap();
    write_blobs(&dir.path().join("pool.csv"), 4000, 1.0);
    let o = werm(dir.path(), &["--seed", "7", "--out", "biased.csv", "biasgen", "--in", "pool.csv", "--gamma", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout_json(&o);
    let n = report["n"].as_u64().unwrap() as usize;
    assert!(dir.path().join("biased.p_prime.json").exists());
    let rows = std::fs::read_to_string(dir.path().join("biased.csv")).unwrap();
    assert_eq!(rows.lines().count(), n + 1);

    let o = werm(
        dir.path(),
        &["--out", "w.csv", "weights", "--in", "biased.csv", "--kind", "strata", "--pk", "0.25,0.25,0.25,0.25"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w: Vec<f64> = std::fs::read_to_string(dir.path().join("w.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(w.len(), n);
    // Σ n p_k / n'_k over a stratum of size n'_k is n p_k, so the mean is 1.
    assert!((w.iter().sum::<f64>() / n as f64 - 1.0).abs() < 1e-12);

    let o = werm(dir.path(), &["--config", "x.json", "biasgen", "--in", "pool.csv", "--gamma", "0.3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.json"),
        r#"{
            "scenario": "strata_shift",
            "source": {"kind": "synthetic", "pool_per_stratum": 200, "n_test": 300},
            "bias": {"gamma": 0.4, "target_pk": [0.2, 0.2, 0.2, 0.2, 0.2]},
            "train": {"lr": 0.05, "epochs": 2, "batch_size": 100, "top_k": 2},
            "modes": ["uniform", "strata"],
            "replicates": 2
        }"#,
    )
    .unwrap();
    let read = |sub: &str| {
        let mut files: Vec<(String, Vec<u8>)> = walk(&dir.path().join(sub))
            .into_iter()
            .map(|p| (p.strip_prefix(dir.path().join(sub)).unwrap().display().to_string(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let run = |seed: &str| {
        let o = werm(dir.path(), &["--config", "spec.json", "--seed", seed, "--out", "a", "experiment"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        read("a")
    };
    let first = run("9");
    assert_eq!(first.len(), 2 + 4);
    assert_eq!(first, run("9"));
    assert_ne!(first, run("10"));

    let o = werm(dir.path(), &["experiment"]);
    assert_eq!(code(&o), 2);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn analytic_writes_both_curve_families() {
    let dir = tempfile::tempdir().unwrap();
    let o = werm(dir.path(), &["--out", "curves", "analytic", "--p", "0.4", "--points", "9"]);
    assert_eq!(code(&o), 0);
    let names: Vec<String> = std::fs::read_dir(dir.path().join("curves"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 8);
    let excess = std::fs::read_to_string(dir.path().join("curves/excess_a1_b1.csv")).unwrap();
    assert_eq!(excess.lines().count(), 10);
    let bad = werm(dir.path(), &["analytic", "--p", "1.5"]);
    assert_eq!(code(&bad), 2);
}

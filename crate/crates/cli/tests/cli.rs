use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sasi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sasi"))
        .args(args)
        .env_remove("SASI_JOBS")
        .output()
        .expect("run sasi")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_decompose_recovers_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = sasi(&[
        "generate",
        "--dim",
        "12",
        "--rank",
        "5",
        "--seed",
        "3",
        "--out-dir",
        path(&gen),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(gen.join("tensor.txt")).unwrap();
    assert_eq!(text.lines().next(), Some("12 12 12"));

    let model = dir.path().join("est.json");
    let trace = dir.path().join("trace.csv");
    let out = sasi(&[
        "decompose",
        "--tensor",
        path(&gen.join("tensor.txt")),
        "--target-rank",
        "3",
        "--truth",
        path(&gen.join("model.json")),
        "--out",
        path(&model),
        "--trace",
        path(&trace),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(est["r"], 3);
    let csv = fs::read_to_string(&trace).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("iter,tan_A,tan_B,tan_C,err_A,err_B,err_C,residual,wall_ms")
    );
    // initialization plus ten sweeps
    assert_eq!(csv.lines().count(), 12);
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    for cell in &last[4..7] {
        assert!(cell.parse::<f64>().unwrap() <= 1e-8, "{last:?}");
    }
}

#[test]
fn deflation_writes_components() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = sasi(&[
        "generate",
        "--dim",
        "8",
        "--rank",
        "3",
        "--symmetric",
        "--out-dir",
        path(&gen),
    ]);
    assert!(out.status.success());
    let model = dir.path().join("defl.json");
    let out = sasi(&[
        "decompose",
        "--tensor",
        path(&gen.join("tensor.txt")),
        "--target-rank",
        "3",
        "--method",
        "rank1-deflation",
        "--out",
        path(&model),
        "--trace",
        path(&dir.path().join("t.csv")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["method"], "rank1-deflation");
    let weights: Vec<f64> = doc["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["weight"].as_f64().unwrap())
        .collect();
    for (w, expected) in weights.iter().zip([3.0, 2.0, 1.0]) {
        assert!((w - expected).abs() < 1e-8, "{weights:?}");
    }
}

#[test]
fn experiment_writes_outputs_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d": 12, "R": 5, "r": 2, "trials": 50, "iters": 6}"#).unwrap();
    let out_dir = dir.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_sasi"))
        .args([
            "experiment",
            "--config",
            path(&cfg),
            "--out-dir",
            path(&out_dir),
            "--trials",
            "3",
            "--seed",
            "9",
        ])
        .env("SASI_JOBS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traces = fs::read_to_string(out_dir.join("traces.csv")).unwrap();
    assert!(traces.starts_with("trial,method,iter,tan_A,tan_B,tan_C,err_A,err_B,err_C,residual,wall_ms\n"));
    assert_eq!(traces.lines().count(), 1 + 2 * 3 * 7);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["trials"], 3);
    assert_eq!(resolved["base_seed"], 9);
    assert!(resolved["spi"].is_object());
    assert!(fs::read_to_string(out_dir.join("aggregate.csv"))
        .unwrap()
        .starts_with("method,iter,metric,p5,p50,p95\n"));
}

#[test]
fn experiment_exits_nonzero_when_a_method_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // spi needs a symmetric tensor, so every trial records an error
    fs::write(
        &cfg,
        r#"{"d": 8, "R": 3, "r": 2, "trials": 2, "methods": ["s-asi", "spi"]}"#,
    )
    .unwrap();
    let out = sasi(&[
        "experiment",
        "--config",
        path(&cfg),
        "--out-dir",
        path(&dir.path().join("o")),
        "--jobs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("o/summary.json").exists());
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d": 8, "R": 3, "r": 5}"#).unwrap();
    let out = sasi(&["experiment", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r <= R"));
}

#[test]
fn condnum_writes_kappa_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("kappa.csv");
    let args = [
        "condnum",
        "--dim",
        "8",
        "--rank",
        "8",
        "--lambda",
        "geometric",
        "--samples",
        "25",
        "--out",
        path(&csv),
    ];
    let out = sasi(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(&csv).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("sample,kappa,kappa_formula"));
    assert_eq!(text.lines().count(), 26);
    assert!(sasi(&args).status.success());
    assert_eq!(fs::read(&csv).unwrap(), first);
}

#[test]
fn condnum_accepts_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert!(
        sasi(&["generate", "--dim", "6", "--rank", "6", "--out-dir", path(&gen)])
            .status
            .success()
    );
    let csv = dir.path().join("k.csv");
    let out = sasi(&[
        "condnum",
        "--model",
        path(&gen.join("model.json")),
        "--samples",
        "10",
        "--out",
        path(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);
}

#[test]
fn verify_passes() {
    let out = sasi(&["verify", "--seed", "4"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn unknown_method_is_rejected() {
    let out = sasi(&[
        "decompose",
        "--tensor",
        "x",
        "--target-rank",
        "1",
        "--method",
        "hosvd",
        "--out",
        "o",
        "--trace",
        "t",
    ]);
    assert!(!out.status.success());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfbounds"))
}

fn configs() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

/// Variance-swap config rewritten into `dir` with a small explicit mesh.
fn small_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("variance_swap.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["mesh"] = serde_json::json!({"nodes": [1.0, 40.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 160.0, 200.0]});
    edit(&mut v);
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn bound_variance_swap_both_sides() {
    let cfg = configs().join("variance_swap.json");
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--side", "both", "--format", "table"]);
    let s = text(&out);
    assert!(out.status.success(), "{s}");
    assert!(s.contains("lower (sub-replication) bound: 0.0158"), "{s}");
    assert!(s.contains("upper (super-replication) bound: 0.0208"), "{s}");
    assert!(!s.contains("-0.0000"), "{s}");
    assert!(s.contains("λ_2"), "{s}");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let mut files = Vec::new();
    for round in 0..2 {
        let out_dir = dir.path().join(format!("run{round}"));
        let out = run(&[
            "bound",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "json",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", text(&out));
        files.push((
            std::fs::read(out_dir.join("variance_swap_upper.json")).unwrap(),
            std::fs::read(out_dir.join("variance_swap_lower.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let report: serde_json::Value = serde_json::from_slice(&files[0].0).unwrap();
    assert_eq!(report["side"], "upper");
    assert!(report["bound_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn json_on_stdout_parses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--side", "lower", "--format", "json"]);
    assert!(out.status.success(), "{}", text(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["side"], "lower");
}

#[test]
fn csv_hedge_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("csv");
    let out = run(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--side",
        "upper",
        "--format",
        "csv",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let csv = std::fs::read_to_string(out_dir.join("variance_swap_upper.csv")).unwrap();
    assert!(csv.starts_with("expiry_index,strike,net_position\n"));
    assert_eq!(csv.lines().count(), 15);
}

#[test]
fn oracle_checks_pass_on_small_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--oracle", "on"]);
    let s = text(&out);
    assert!(out.status.success(), "{s}");
    assert!(s.contains("brute force"), "{s}");
    assert!(!s.contains("FAIL"), "{s}");
}

#[test]
fn verify_forward_start() {
    let cfg = configs().join("forward_start.json");
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    let s = text(&out);
    assert!(out.status.success(), "{s}");
    assert!(s.contains("all") && s.contains("checks passed"), "{s}");
}

#[test]
fn verify_infeasible_quotes() {
    let dir = tempfile::tempdir().unwrap();
    // a call worth more than the spot admits no martingale measure
    let quotes = dir.path().join("q.csv");
    std::fs::write(&quotes, "expiry_index,strike,bid,ask\n1,100,150,151\n").unwrap();
    let cfg = small_config(dir.path(), |v| {
        v["quotes"] = serde_json::json!({"csv": quotes});
        v["output"]["oracle"]["verify_mesh"] = serde_json::Value::Null;
    });
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    let s = text(&out);
    assert_eq!(out.status.code(), Some(3), "{s}");
    assert!(s.contains("PrimalInfeasible"), "{s}");
}

#[test]
fn crossed_quotes_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("q.csv");
    std::fs::write(&quotes, "expiry_index,strike,bid,ask\n1,100,5.0,4.0\n").unwrap();
    let cfg = small_config(dir.path(), |v| v["quotes"] = serde_json::json!({"csv": quotes}));
    let out = run(&["bound", "--config", cfg.to_str().unwrap()]);
    let s = text(&out);
    assert_eq!(out.status.code(), Some(2), "{s}");
    assert!(s.to_lowercase().contains("crossed"), "{s}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"spec\": 1}").unwrap();
    assert_eq!(run(&["bound", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["bound", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let cfg = small_config(dir.path(), |_| {});
    // explicit meshes cannot be rescaled
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--mesh-scale", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
}

#[test]
fn quotes_synth_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("forward_start.json");
    let out = run(&["quotes-synth", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("quotes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 15);
    assert!(csv.starts_with("expiry_index,strike,bid,ask"));
    // stdout variant matches byte for byte
    let out = run(&["quotes-synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csv);
}

#[test]
fn quotes_synth_needs_synth_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |v| v["quotes"] = serde_json::json!("none"));
    assert_eq!(run(&["quotes-synth", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn zero_certificate_tolerance_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |v| v["solver"]["certify_tol"] = serde_json::json!(0.0));
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    let s = text(&out);
    assert_eq!(out.status.code(), Some(4), "{s}");
    assert!(s.contains("certificate failed"), "{s}");
}

#[test]
fn zero_oracle_tolerance_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |v| v["output"]["oracle"] = serde_json::json!({"tol": 0.0}));
    let out = run(&["bound", "--config", cfg.to_str().unwrap(), "--oracle", "on", "--format", "csv"]);
    let s = text(&out);
    assert_eq!(out.status.code(), Some(5), "{s}");
    assert!(s.contains("FAIL"), "{s}");
}

use std::process::Command;

fn stv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stv"))
}

#[test]
fn eval_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.json");
    let status = stv()
        .args([
            "eval",
            "--order",
            "2,0,0",
            "--seasonal",
            "1,0,0,12",
            "--window-sizes",
            "72",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["overall"].as_f64().unwrap() > 0.0);
    assert_eq!(v["windows"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# tiny run\norder = 1,0,0\nwindow_sizes = 72\nbackend = nope\n",
    )
    .unwrap();
    let bad = stv().args(["eval", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let ok = stv()
        .args(["eval", "--backend", "ring", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let out = stv().args(["fit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn small_window_is_a_config_error() {
    let out = stv()
        .args(["eval", "--order", "2,0,0", "--window-sizes", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_file_fails() {
    let out = stv()
        .args(["fit", "--dataset", "/nonexistent/data.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn forecast_reports_requested_horizon() {
    let out = stv()
        .args(["forecast", "--order", "1,1,0", "--horizon", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["forecast"].as_array().unwrap().len(), 4);
}

#[test]
fn scale_bench_prices_grid() {
    let out = stv()
        .args([
            "scale-bench",
            "--parties",
            "2,3",
            "--features",
            "2",
            "--samples",
            "20",
            "--iters",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 4);
}

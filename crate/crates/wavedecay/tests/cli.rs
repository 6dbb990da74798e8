//! End-to-end exercise of the binary: exit codes, artifacts, rendering.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavedecay"))
}

fn configs(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn constants_mode_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "constants",
            "--config",
            &configs("constants.toml"),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report.json");
    assert!(report.exists());
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    assert!(text.contains("config_sha256"));

    // render round-trip
    let rendered = bin()
        .args(["render", "--report", report.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(rendered.status.success());
    let stdout = String::from_utf8_lossy(&rendered.stdout);
    assert!(stdout.contains("[PASS]"));
    assert!(stdout.contains("delta = 0.486"));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "mode = \"lemma1\"\n[sweep\n").unwrap();
    let out = bin()
        .args(["lemma1", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn mode_mismatch_exits_two() {
    let out = bin()
        .args(["lemma1", "--config", &configs("solve.toml")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("energy.toml");
    fs::write(
        &cfg,
        r#"
mode = "energy"

[data]
m = 4.0
f = { kind = "gaussian-bump", amplitude = 1.0, center = 2.0, width = 1.5 }
g = { kind = "zero" }

[potential]
k = 3.0
profile = { kind = "model", amplitude = 0.003, decay = 3.0 }

[fd]
dr = 0.05
r_max = 12.0
cfl = 0.5
t_final = 5.0
energy_every = 10

[energy]
drift_tol = 1e-15
refine = false
"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "energy",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("out/report.json").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn tolerance_override_changes_verdict() {
    // the same failing energy config passes when the tolerance is overridden
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("energy.toml");
    fs::write(
        &cfg,
        r#"
mode = "energy"

[data]
m = 4.0
f = { kind = "gaussian-bump", amplitude = 1.0, center = 2.0, width = 1.5 }
g = { kind = "zero" }

[potential]
k = 3.0
profile = { kind = "model", amplitude = 0.003, decay = 3.0 }

[fd]
dr = 0.05
r_max = 12.0
cfl = 0.5
t_final = 5.0
energy_every = 10

[energy]
drift_tol = 1e-15
refine = false
"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "energy",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--tolerance",
            "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let run_once = || {
        let dir = tempfile::tempdir().unwrap();
        let out = bin()
            .args([
                "lemma2",
                "--config",
                &configs("lemma2.toml"),
                "--out",
                dir.path().to_str().unwrap(),
                "--threads",
                "2",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read(dir.path().join("report.json")).unwrap()
    };
    assert_eq!(run_once(), run_once());
}

#[test]
fn render_rejects_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    fs::write(
        &path,
        r#"{"schema_version":99,"mode":"constants","config_sha256":"x","seed":0,"tolerances":{},"pass":true,"payload":{"kind":"oracle","n_steps":1,"dt":0.1,"observers":[],"energy_drift":null}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["render", "--report", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

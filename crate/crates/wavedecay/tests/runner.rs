//! Library-level runner checks: payload values and report envelope.

use wavedecay::config::{ExperimentConfig, Mode};
use wavedecay::report::{Payload, RunReport};
use wavedecay::runner::run;

const CONSTANTS: &str = r#"
mode = "constants"

[data]
m = 4.0
f = { kind = "model", amplitude = 0.3333333333333333, decay = 3.0 }
g = { kind = "model", amplitude = 1.0, decay = 4.0 }
f0 = 1.0
f1 = 1.0
g0 = 1.0

[potential]
k = 3.0
profile = { kind = "model", amplitude = 0.003, decay = 3.0 }
v0 = 0.003
"#;

#[test]
fn constants_report_carries_reference_values() {
    let config = ExperimentConfig::from_toml_str(CONSTANTS).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&config, Mode::Constants, dir.path(), 0).unwrap();
    assert!(outcome.report.pass);
    assert_eq!(outcome.report.schema_version, 1);
    assert_eq!(outcome.report.mode, "constants");
    assert_eq!(outcome.report.config_sha256.len(), 64);

    match &outcome.report.payload {
        Payload::Constants { theorem, .. } => {
            assert_eq!(theorem.p, 3.0);
            assert!((theorem.delta - 0.486).abs() < 1e-12);
            assert!((theorem.c_total.unwrap() - 29.1828793774319).abs() < 1e-10);
            assert!(theorem.contractive);
        }
        _ => panic!("wrong payload"),
    }

    // the JSON on disk round-trips and validates its schema
    let reread = RunReport::read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(reread.config_sha256, outcome.report.config_sha256);
}

#[test]
fn non_contractive_constants_flagged_not_crashed() {
    let config = ExperimentConfig::from_toml_str(
        &CONSTANTS.replace("amplitude = 0.003", "amplitude = 0.5").replace("v0 = 0.003", "v0 = 0.5"),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&config, Mode::Constants, dir.path(), 0).unwrap();
    assert!(!outcome.report.pass);
    match &outcome.report.payload {
        Payload::Constants { theorem, .. } => {
            assert!(!theorem.contractive);
            assert!(theorem.delta >= 1.0);
            assert!(theorem.c_total.is_none());
            assert!(outcome.rendered.contains("outside contraction regime"));
        }
        _ => panic!("wrong payload"),
    }
}

#[test]
fn lemma1_rows_csv_has_documented_columns() {
    let config = ExperimentConfig::from_toml_str(
        r#"
mode = "lemma1"

[sweep]
p_values = [2.5, 4.0]
t_range = { lo = 0.1, hi = 10.0, n = 5 }
x_range = { lo = 0.1, hi = 10.0, n = 5 }
tolerance = 1e-9
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&config, Mode::Lemma1, dir.path(), 0).unwrap();
    assert!(outcome.report.pass);
    let csv = std::fs::read_to_string(dir.path().join("sphere_data_bound.csv")).unwrap();
    assert!(csv.starts_with("t,x,p,q,lhs,rhs,ratio\n"));
    // sphere rows leave q empty
    assert!(csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().is_empty());
}

#[test]
fn oracle_mode_writes_documented_csv_schemas() {
    let config = ExperimentConfig::from_toml_str(
        r#"
mode = "oracle"

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
cfl = 0.9
t_final = 4.0
observers = [1.0, 2.0]
energy_every = 10
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&config, Mode::Oracle, dir.path(), 0).unwrap();
    assert!(outcome.report.pass);
    let obs = std::fs::read_to_string(dir.path().join("observers.csv")).unwrap();
    assert!(obs.starts_with("t,r_obs,u\n"));
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(energy.starts_with("t,E,E0\n"));
    match &outcome.report.payload {
        Payload::Oracle { energy_drift, .. } => assert!(energy_drift.unwrap() < 1e-2),
        _ => panic!("wrong payload"),
    }
}

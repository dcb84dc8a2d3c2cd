use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stap"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn evolve_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(
        &["evolve", "--scenario", "stap-closed", "--omega0", "0.2", "--delta", "3", "--tf", "40", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let f: f64 = line
        .split("F=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(f > 0.99 && f <= 1.0, "{line}");

    let csv = fs::read_to_string(dir.path().join("out/stap-closed.csv")).unwrap();
    let mut lines = csv.split('\n');
    assert_eq!(lines.next(), Some("t,fidelity,pop_chi,pop_varpi,trace,norm"));
    assert!(!csv.contains('\r'));
    assert!(csv.ends_with('\n'));
    assert_eq!(csv.lines().count(), 201);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/stap-closed.summary.json")).unwrap())
            .unwrap();
    let keys: Vec<&str> = summary.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in ["scenario", "params", "fidelity_final", "error_estimate", "warnings"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(summary["scenario"], "stap-closed");
    assert!((summary["fidelity_final"].as_f64().unwrap() - f).abs() < 1e-6);
}

#[test]
fn negative_duration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(&["evolve", "--tf", "-5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("t_f must be positive"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn malformed_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(&["evolve", "--omega0", "fast"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--omega0"));
    let o = stap(&["teleport"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn spectrum_prints_twelve_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(&["spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let mut got: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    let r3 = 3f64.sqrt();
    let mut want = vec![0.0, 0.0, 1.0, 1.0, -1.0, -1.0, 2.0, -2.0, r3, r3, -r3, -r3];
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    assert_eq!(got.len(), 12);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(
        &["sweep", "--scenario", "stap-open", "--kappa", "0.05", "--axis1", "delta:0.5:4:8", "--axis2", "gamma:0:0.05:3", "--dump-config"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = stdout(&o);
    fs::write(dir.path().join("c.json"), &first).unwrap();
    let o = stap(&["sweep", "--config", "c.json", "--dump-config"], dir.path());
    assert_eq!(stdout(&o), first);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"scenario": "stap-closed", "detuning": 3}"#).unwrap();
    let o = stap(&["evolve", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec!["sweep", "--tf", "10", "--steps", "400", "--axis1", "tf:5:10:3", "--axis2", "delta:1:3:2", "--name", name]
    };
    for name in ["a", "b"] {
        let o = stap(&args(name), dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("axis1,axis2,fidelity,status\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn sweep_reports_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(
        &["sweep", "--steps", "200", "--axis1", "tf:5:10:2", "--axis2", "delta:-1:2:2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.lines().any(|l| l.contains(",nan,")));
}

#[test]
fn mismatch_grid_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(
        &["mismatch", "--tf", "20", "--steps", "1000", "--axis1", "omega0:-0.1:0.1:2", "--axis2", "tf:-0.1:0.1:2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("mismatch.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let o = stap(
        &["mismatch", "--axis1", "omega0:-0.9:0.1:2", "--axis2", "tf:-0.1:0.1:2", "--steps", "100"],
        dir.path(),
    );
    // out-of-range deviations are recorded per cell
    assert_eq!(o.status.code(), Some(0));
    let o = stap(&["mismatch", "--scenario", "stap-open", "--axis1", "omega0:0:0.1:2", "--axis2", "tf:0:0.1:2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pulses_emits_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(&["pulses", "--points", "50"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("pulses.csv")).unwrap();
    assert!(text.starts_with("t,omega1,omega3,omega_prime\n"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stap(&["verify"], dir.path());
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(!out.contains("FAIL"));
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 10);
}

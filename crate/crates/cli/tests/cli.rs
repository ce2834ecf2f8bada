use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use sds_core::datasets::{BoundsRow, MagnusReport, WignerRow};
use sds_core::io::{read_json, read_rows, Dataset, Stamped};
use sds_core::optimize::SweepRow;
use sds_core::protocols::{count_sign_changes, DistributionRow};
use tempfile::TempDir;

fn sds(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sds"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn with_config(dir: &TempDir, name: &str, json: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn assert_round_trips(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# schema: "), "{}", path.display());
    assert_eq!(
        Dataset::parse(&text).unwrap().render().unwrap(),
        text,
        "{}",
        path.display()
    );
}

#[test]
fn bounds_dataset() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "b.json",
        r#"{"n_spins": [1, 3], "zeta": {"start": 0.0, "stop": 3.0, "count": 7}, "multi_g": [0.6]}"#,
    );
    let out = sds(&["bounds", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("bounds.csv");
    assert_round_trips(&path);
    let (prov, rows): (_, Vec<BoundsRow>) = read_rows(&path).unwrap();
    assert_eq!(prov.schema, "bounds/1");
    assert_eq!(prov.created, "2023-11-14T22:13:20Z");
    assert_eq!(rows.len(), 2 * 7 + 7);
    let zero = rows.iter().find(|r| r.N == 1 && r.zeta == 0.0).unwrap();
    assert!(zero.CCRB.is_infinite());
    assert!((zero.QCRB - zero.SQL).abs() < 1e-12);
    assert!(std::fs::read_to_string(&path).unwrap().contains(",inf,"));
    // the joint readout beats the SQL once the mode is populated
    assert!(rows
        .iter()
        .filter(|r| r.g == 0.6 && r.n_mean > 1.5)
        .all(|r| r.CCRB < r.SQL));
}

#[test]
fn worker_count_does_not_change_output() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(sds(&["bounds", "--workers", "1"], a.path()).status.success());
    assert!(sds(&["bounds", "--workers", "3"], b.path()).status.success());
    let read = |d: &TempDir| std::fs::read(d.path().join("bounds.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn protocol_distributions_normalized() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "p.json", r#"{"zeta": [0.5, 1.0], "route": "exact"}"#);
    let out = sds(&["protocol", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dist = dir.path().join("protocol_distributions.csv");
    assert_round_trips(&dist);
    assert_round_trips(&dir.path().join("protocol_cfi.csv"));
    let (_, rows): (_, Vec<DistributionRow>) = read_rows(&dist).unwrap();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        *sums
            .entry(format!("{}/{}/{}/{}", r.zeta, r.g, r.beta_re, r.beta_im))
            .or_default() += r.probability;
    }
    assert_eq!(sums.len(), 2 * 3 * 2);
    assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-10));
}

#[test]
fn wigner_analogues_are_z4_symmetric_with_diagonal_fringes() {
    let dir = TempDir::new().unwrap();
    let diagonal = |state: &str| {
        let sub = dir.path().join(state);
        let cfg = with_config(
            &dir,
            &format!("{state}.json"),
            &format!(r#"{{"state": "{state}", "resolution": 161}}"#),
        );
        let out = sds(&["wigner", "--config", &cfg], &sub);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let path = sub.join("wigner.csv");
        assert_round_trips(&path);
        let (_, rows): (_, Vec<WignerRow>) = read_rows(&path).unwrap();
        let key = |x: f64, p: f64| ((x * 1e6).round() as i64, (p * 1e6).round() as i64);
        let grid: BTreeMap<_, f64> = rows.iter().map(|r| (key(r.x, r.p), r.w)).collect();
        for r in &rows {
            let turned = grid[&key(-r.p, r.x)];
            assert!((r.w - turned).abs() < 1e-9, "{state} at ({}, {})", r.x, r.p);
        }
        let diag: Vec<f64> = rows.iter().filter(|r| r.x == r.p).map(|r| r.w).collect();
        assert_eq!(diag.len(), 161);
        count_sign_changes(&diag, 1e-6)
    };
    let (coh, ghz) = (diagonal("coherent_x"), diagonal("ghz"));
    // the outermost squeezed pair fixes the far fringes of both states
    assert!(ghz > 0 && coh >= ghz, "{coh} vs {ghz}");
}

#[test]
fn magnus_report_meets_thresholds() {
    let dir = TempDir::new().unwrap();
    let out = sds(&["magnus-check"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Stamped<MagnusReport> = read_json(dir.path().join("magnus_check.json")).unwrap();
    assert_eq!(report.provenance.schema, "magnus/1");
    assert_eq!(report.payload.g_over_delta, 0.01);
    assert_eq!(report.payload.checks.len(), 3);
    for c in &report.payload.checks {
        assert!(c.theta2_residual < 1e-8);
        assert!(c.passed);
    }
}

#[test]
fn sds_table_files() {
    let dir = TempDir::new().unwrap();
    assert!(sds(&["sds-table"], dir.path()).status.success());
    assert_round_trips(&dir.path().join("sds_table.csv"));
    let v: serde_json::Value = read_json(dir.path().join("sds_bounds.json")).unwrap();
    assert_eq!(v["provenance"]["schema"], "sds_table/1");
    assert!(v["reports"].as_array().unwrap().len() >= 3);
}

#[test]
fn fig4_resumes_and_emits_trajectories() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "f.json", r#"{"grid": {"n_spins": [1, 2], "z": [0.1, 0.3]}}"#);
    let out = sds(&["fig4", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("fig4.csv");
    assert_round_trips(&path);
    let (_, rows): (_, Vec<SweepRow>) = read_rows(&path).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.is_ok() && r.P == Some(1) && r.fidelity > 0.99));

    let traj = dir.path().join("fig4/trajectory_N2_z0.300.csv");
    assert_round_trips(&traj);
    let (_, points): (_, Vec<sds_core::dynamics::TrajectoryPoint>) = read_rows(&traj).unwrap();
    assert_eq!(points.len(), 5);
    assert!((points[4].fidelity - rows[3].fidelity).abs() < 1e-6);
    let schedule: Stamped<sds_core::dynamics::ScheduleFile> =
        read_json(dir.path().join("fig4/schedule_N2_z0.300.json")).unwrap();
    assert_eq!(schedule.payload.params().unwrap().reps, 1);

    // a rerun with the same config keeps finished rows verbatim
    let text = std::fs::read_to_string(&path).unwrap();
    let marker = format!("{}", rows[0].fidelity);
    std::fs::write(&path, text.replacen(&marker, "0.995", 1)).unwrap();
    assert!(sds(&["fig4", "--config", &cfg], dir.path()).status.success());
    let (_, again): (_, Vec<SweepRow>) = read_rows(&path).unwrap();
    assert_eq!(again[0].fidelity, 0.995);
    assert_eq!(again[1..], rows[1..]);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let unknown = with_config(&dir, "u.json", r#"{"n_spinz": [1]}"#);
    assert_eq!(
        sds(&["bounds", "--config", &unknown], dir.path()).status.code(),
        Some(2)
    );
    let missing = dir.path().join("absent.json");
    assert_eq!(
        sds(&["wigner", "--config", missing.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(sds(&["magnus-check", "--tol", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(sds(&["bounds", "--workers", "0"], dir.path()).status.code(), Some(2));
    let bad_state = with_config(&dir, "w.json", r#"{"n_spins": 0}"#);
    assert_eq!(
        sds(&["wigner", "--config", &bad_state], dir.path()).status.code(),
        Some(2)
    );

    // every grid point infeasible is a numerical failure, and the rows are still written
    let hopeless = with_config(
        &dir,
        "h.json",
        r#"{"grid": {"n_spins": [1], "z": [0.6]}, "search": {"p_max": 1, "threshold": 0.999999999}, "trajectories": false}"#,
    );
    let sub = dir.path().join("hopeless");
    assert_eq!(sds(&["fig4", "--config", &hopeless], &sub).status.code(), Some(3));
    let (_, rows): (_, Vec<SweepRow>) = read_rows(sub.join("fig4.csv")).unwrap();
    assert_eq!(rows[0].status, "no_feasible_p");
}

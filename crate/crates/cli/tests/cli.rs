//! End-to-end behaviour of the `relcomplete` binary.

use std::path::Path;
use std::process::{Command, Output};

use relcomplete::{builtin, save};
use relcomplete_cli::{sample_initial_states, EXIT_CONFIG, EXIT_NO_PREDICTION, EXIT_OK};

fn relcomplete(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relcomplete")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = relcomplete(&["run", "--scenario", "clifton-pohl", "--output", out]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "clifton-pohl.trajectory.csv");
    assert_eq!(csv.lines().next().unwrap(), "t,q_1,q_2,v_1,v_2,energy_c,killing_charge,gR_speed");
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "clifton-pohl.report.json")).unwrap();
    assert_eq!(report["classification"], "BlowupAt");
    assert!((report["t_star"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(report["blowup_cause"], "speed_threshold");
    // stdout carries the same report
    assert_eq!(String::from_utf8(o.stdout).unwrap(), read(dir.path(), "clifton-pohl.report.json"));
}

#[test]
fn run_accepts_initial_overrides_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = relcomplete(&[
        "run", "--scenario", "flat-lorentz-torus", "--q0", "0.5,0.5", "--v0", "-1,0.25", "--t-max", "3", "--format", "json",
        "--output", out,
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_str(&read(dir.path(), "flat-lorentz-torus.trajectory.json")).unwrap();
    let first = &rows[0];
    assert_eq!(first["v"], serde_json::json!([-1.0, 0.25]));
    assert!(first.get("gR_speed").is_some());
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "flat-lorentz-torus.report.json")).unwrap();
    assert_eq!(report["config"]["integration"]["horizon"], 3.0);
    assert_eq!(report["classification"], "CompleteToHorizon");
}

#[test]
fn null_plane_report_asserts_flat_complete_metric_and_null_drive() {
    let o = relcomplete(&["run", "--scenario", "null-plane-cubic"]);
    assert_eq!(code(&o), EXIT_OK);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["diagnostics"]["metric_flat_complete"], true);
    assert_eq!(report["diagnostics"]["field_norms"]["max_abs_g_xx"], 0.0);
    assert_eq!(report["classification"], "BlowupAt");
}

#[test]
fn check_exit_codes_follow_the_prediction() {
    for (name, expected) in [("t3-magnetic", EXIT_OK), ("riemann-flat-torus", EXIT_OK), ("clifton-pohl", EXIT_NO_PREDICTION)] {
        let o = relcomplete(&["check", "--scenario", name, "--points", "300"]);
        assert_eq!(code(&o), expected, "{name}");
        let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report["criterion"]["provenance"], "sampled check, not a proof");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let cases: [&[&str]; 7] = [
        &["run", "--scenario", "no-such-scenario"],
        &["run", "--scenario", "clifton-pohl", "--tol", "-1"],
        &["run", "--scenario", "clifton-pohl", "--q0", "1,2,3"],
        &["run", "--scenario", "clifton-pohl", "--q0", "0,0"],
        &["sweep", "--scenario", "clifton-pohl", "-n", "0"],
        &["check", "--scenario", "clifton-pohl", "--points", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = relcomplete(args);
        assert_eq!(code(&o), EXIT_CONFIG, "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn malformed_scenario_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"name\": \"x\", ").unwrap();
    let o = relcomplete(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn saved_scenario_files_run_like_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("np.json");
    save(&builtin("null-plane-cubic").unwrap(), &path).unwrap();
    let from_file = relcomplete(&["run", "--scenario", path.to_str().unwrap()]);
    let from_name = relcomplete(&["run", "--scenario", "null-plane-cubic"]);
    assert_eq!(code(&from_file), EXIT_OK);
    assert_eq!(from_file.stdout, from_name.stdout);
}

#[test]
fn sweep_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = relcomplete(&["sweep", "--scenario", "clifton-pohl", "-n", "50", "--seed", "7", "--output", out]);
    assert_eq!(code(&o), EXIT_OK);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let csv = read(dir.path(), "clifton-pohl.sweep.csv");
    assert_eq!(csv, read(&golden, "clifton-pohl.sweep.csv"));
    assert_eq!(read(dir.path(), "clifton-pohl.sweep.json"), read(&golden, "clifton-pohl.sweep.json"));
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.lines().skip(1).any(|l| l.contains(",BlowupAt,")));
}

#[test]
fn sweep_json_format_lists_every_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = relcomplete(&["sweep", "--scenario", "riemann-flat-torus", "-n", "5", "--t-max", "2", "--format", "json", "--output", out]);
    assert_eq!(code(&o), EXIT_OK);
    let rows: serde_json::Value = serde_json::from_str(&read(dir.path(), "riemann-flat-torus.sweep.trajectories.json")).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    let agg: serde_json::Value = serde_json::from_str(&read(dir.path(), "riemann-flat-torus.sweep.json")).unwrap();
    assert_eq!(agg["counts"]["CompleteToHorizon"], 5);
}

#[test]
fn sampled_states_lie_in_the_fundamental_domain() {
    let cp = builtin("clifton-pohl").unwrap();
    for s in sample_initial_states(&cp, 200, 3, 1.0, 1.0).unwrap() {
        let r = s.q.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((1.0..2.0).contains(&r), "{:?}", s.q);
    }
    let t3 = builtin("t3-magnetic").unwrap();
    for s in sample_initial_states(&t3, 200, 3, 0.5, 1.0).unwrap() {
        assert!(s.q.iter().all(|&x| (0.0..1.0).contains(&x)), "{:?}", s.q);
        assert!(t3.manifold.domain().contains(&s.q));
    }
    // no Killing field: Euclidean ball, box around the initial point
    let rs = builtin("riemann-superlinear").unwrap();
    for s in sample_initial_states(&rs, 200, 3, 0.5, 0.25).unwrap() {
        assert!(s.v.iter().map(|x| x * x).sum::<f64>() <= 0.25 + 1e-12);
        assert!(s.q.iter().zip(&rs.initial.q).all(|(a, b)| (a - b).abs() <= 0.25));
    }
}

#[test]
fn sampled_velocities_fill_the_auxiliary_ball() {
    let t3 = builtin("t3-magnetic").unwrap();
    let states = sample_initial_states(&t3, 300, 11, 0.5, 1.0).unwrap();
    let mut largest = 0.0f64;
    for s in &states {
        let g = t3.manifold.metric_at(&s.q).unwrap();
        let k = t3.fields.killing_at(&s.q).unwrap().unwrap();
        let z = relcomplete::fields::unit_timelike(&g, &k).unwrap();
        let speed = t3.manifold.auxiliary_riemannian(&s.q, &z, &s.v).unwrap().sqrt();
        assert!(speed <= 0.5 + 1e-12, "{speed}");
        largest = largest.max(speed);
    }
    assert!(largest > 0.45);
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    let t3 = builtin("t3-magnetic").unwrap();
    let a = sample_initial_states(&t3, 10, 5, 1.0, 1.0).unwrap();
    let b = sample_initial_states(&t3, 10, 5, 1.0, 1.0).unwrap();
    let c = sample_initial_states(&t3, 10, 6, 1.0, 1.0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

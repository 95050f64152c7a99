use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatkhinchin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

#[test]
fn surface_info_reports_topology() {
    let v = json(&["surface", "info", "-s", "l-shape:2,2"]);
    assert_eq!(v["genus"], 2);
    assert_eq!(v["multiplicity_sum"], 2);
    assert_eq!(v["sigma_inverse"], 2);
    assert_eq!(v["schema_version"], 1);
    let v = json(&["surface", "info", "-s", "octagon"]);
    assert_eq!(v["genus"], 2);
}

#[test]
fn exported_surface_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.json");
    let p = path.to_str().unwrap();
    stdout(&["surface", "export", "-s", "L(2,3)", "--out", p]);
    let a = json(&["surface", "info", "-s", "L(2,3)"]);
    let b = json(&["surface", "info", "-s", p]);
    assert_eq!(a["area"], b["area"]);
    assert_eq!(a["vertex_classes"], b["vertex_classes"]);
}

#[test]
fn unknown_surface_fails_cleanly() {
    let out = cli(&["surface", "info", "-s", "dodecahedron"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown surface"));
}

#[test]
fn cylinder_table_csv() {
    let text = stdout(&["cylinders", "enumerate", "-s", "torus", "--length", "2", "--format", "csv"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,T,h,area"));
    // (1,0), (0,1), (1,1), (1,-1)
    assert_eq!(lines.count(), 4);
}

#[test]
fn trace_emits_json_lines() {
    let text = stdout(&["flow", "trace", "--point", "0.5", "0.25", "--theta", "0", "--time", "2.2"]);
    let events: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 3);
    assert_eq!(events[2]["kind"], "time_reached");
    assert!((events[2]["x"].as_f64().unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn iet_scan_csv_columns() {
    let text = stdout(&[
        "iet", "scan", "--theta", "0.1", "--x", "0.3", "--n", "2000", "--a", "harmonic:1", "--format", "csv",
    ]);
    assert_eq!(text.lines().next(), Some("n,distance,a_n"));
    assert!(text.lines().count() > 3);
}

#[test]
fn verify_lemma_flow_passes_on_torus() {
    let v = json(&["verify", "lemma-flow", "-s", "torus", "--length", "6"]);
    assert_eq!(v["pass"], true);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_key_reports_candidate() {
    let v = json(&["verify", "key", "-s", "torus", "--n", "10", "--c1", "2", "--j", "0,0.5"]);
    assert!(v["cylinders"].as_u64().unwrap() > 0);
    assert!(v["c2_candidate"].as_f64().unwrap() > 0.0);
}

#[test]
fn series_check_flags_convergence() {
    let v = json(&["series", "check", "--a", "power:1,3", "--k", "10000"]);
    assert_eq!(v["sandwich_holds"], true);
    assert_eq!(v["verdicts"][0]["verdict"], "converges_empirically");
}

#[test]
fn experiment_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        stdout(&[
            "experiment", "khinchin-flow", "-s", "L(2,2)", "--samples", "6", "--horizon", "300", "--seed", "17",
            "--threads", threads, "--out", path.to_str().unwrap(),
        ]);
        std::fs::read(path).unwrap()
    };
    let a = run("1", "a.json");
    assert_eq!(a, run("3", "b.json"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v.get("threads").is_none() && v["config"].get("threads").is_none());
}

#[test]
fn iet_recurrence_flags_convergent_targets() {
    let v = json(&["experiment", "iet-recurrence", "--a", "power:1,2", "--samples", "5", "--n", "1000"]);
    assert_eq!(v["aggregate"]["hypothesis_violated"], true);
    let v = json(&["experiment", "iet-recurrence", "--a", "harmonic:1", "--samples", "5", "--n", "1000"]);
    assert_eq!(v["aggregate"]["hypothesis_violated"], false);
}

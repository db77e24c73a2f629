use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vendingrd"));
    c.env("VENDINGRD_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn export_erasure(dir: &Path) -> String {
    let spec = dir.join("spec.json");
    ok(&["export-spec", "--epsilon", "0.2", "--output", spec.to_str().unwrap()]);
    spec.to_str().unwrap().to_string()
}

#[test]
fn fig4_case2_endpoints() {
    let text = ok(&["closed-form", "--preset", "fig4", "--epsilon", "0.2"]);
    assert!(text.starts_with("curve,d3,gamma,r1,r2,feasible\n"));
    let all = rows(&text);
    assert_eq!(all.len(), 4 * 101);
    let case2: Vec<_> = all.iter().filter(|r| r[0] == "case2").collect();
    let first = case2.iter().find(|r| r[5] == "1").unwrap();
    assert_eq!(first[2], "0.2");
    assert!((first[3].parse::<f64>().unwrap() - 0.7219280949).abs() < 1e-9);
    let last = case2.last().unwrap();
    assert_eq!((last[2].as_str(), last[3].as_str()), ("1", "0"));
    // infeasible rows carry empty rate cells
    let below = case2.iter().find(|r| r[2] == "0.1").unwrap();
    assert_eq!((below[3].as_str(), below[4].as_str(), below[5].as_str()), ("", "", "0"));
    assert!(!text.contains("inf") && !text.contains("NaN"));
}

#[test]
fn case1_without_erasures() {
    let text = ok(&["closed-form", "--case", "case1", "--epsilon", "0", "--gamma", "0.5"]);
    let r = rows(&text);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][3], "0.5");
}

#[test]
fn fig6_curves_flat_beyond_d3() {
    let text = ok(&["closed-form", "--preset", "fig6", "--epsilon", "0.2"]);
    for d3 in ["0.4", "0.6", "0.8", "1"] {
        let at: Vec<f64> = rows(&text)
            .iter()
            .filter(|r| r[1] == d3 && r[2].parse::<f64>().unwrap() >= d3.parse::<f64>().unwrap())
            .map(|r| r[3].parse().unwrap())
            .collect();
        assert!(!at.is_empty());
        assert!(at.iter().all(|v| (v - at[0]).abs() < 1e-6), "D3 = {d3}: {at:?}");
    }
}

#[test]
fn bad_range_is_usage_error() {
    let out = run(&["closed-form", "--case", "case1", "--gamma-min", "0.5", "--gamma-max", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["closed-form", "--case", "case9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_case1_policy() {
    let dir = TempDir::new().unwrap();
    let spec = export_erasure(dir.path());
    let policy = dir.path().join("p.json");
    ok(&["export-policy", "--case", "case1", "--epsilon", "0.2", "--gamma", "0.4", "--output", policy.to_str().unwrap()]);
    let report = ok(&["evaluate", "--spec", &spec, "--policy", policy.to_str().unwrap()]);
    let r1: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("R1 = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((r1 - 1.121928).abs() < 1e-6, "{report}");
    assert!(report.contains("Gamma = 0.4"));
    assert_eq!(report.matches("(ok)").count(), 2, "{report}");
}

#[test]
fn evaluate_point_mass_gives_zero_rates() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("s.json");
    std::fs::write(
        &spec,
        r#"{
  "mode": "direct",
  "alphabets": {"X": ["0"], "Z": ["0"], "Y": ["0"], "A": ["0"], "Xhat1": ["0"], "Xhat2": ["0"]},
  "source": {"variables": ["X", "Z"], "table": ["1"]},
  "vending": {"0,0,0": [1]},
  "cost": {"0": 0},
  "metrics": {"d1": {}, "d2": {}}
}"#,
    )
    .unwrap();
    let policy = dir.path().join("p.json");
    std::fs::write(
        &policy,
        r#"{"u": ["u"], "v": ["v"], "forward": {"0": [1]}, "backward": {"0,u,0": [1]}}"#,
    )
    .unwrap();
    let report = ok(&["evaluate", "--spec", spec.to_str().unwrap(), "--policy", policy.to_str().unwrap()]);
    for k in ["R1", "R2", "D1", "D2", "Gamma"] {
        assert!(report.contains(&format!("{k} = 0\n")), "{report}");
    }
}

#[test]
fn mismatched_alphabets_exit_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let spec = export_erasure(dir.path());
    let policy = dir.path().join("p.json");
    ok(&["export-policy", "--case", "case1", "--gamma", "0.4", "--output", policy.to_str().unwrap()]);
    let text = std::fs::read_to_string(&policy).unwrap().replace("\"0,0,0\"", "\"0,0,x\"");
    std::fs::write(&policy, text).unwrap();
    let out = run(&["evaluate", "--spec", &spec, "--policy", policy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("backward") && err.contains("`x`"), "{err}");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"mode\": \"direct\",\n  \"alphabets\": 7\n}").unwrap();
    let out = run(&["evaluate", "--spec", broken.to_str().unwrap(), "--policy", policy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn seeded_sweep_tracks_case1_curve() {
    let dir = TempDir::new().unwrap();
    let spec = export_erasure(dir.path());
    let csv = dir.path().join("sweep.csv");
    let dump = dir.path().join("policies");
    ok(&[
        "sweep", "--spec", &spec, "--d1", "max", "--d2", "0", "--gamma", "0.3,0.6,0.9",
        "--seed-case", "case1", "--restarts", "2", "--dump-policies", dump.to_str().unwrap(),
        "--output", csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("gamma,r1,r2,d1,d2,d3,residual\n"));
    let h2 = 0.7219280948873623;
    for r in rows(&text) {
        let g: f64 = r[0].parse().unwrap();
        let r1: f64 = r[1].parse().unwrap();
        let want = h2 + (0.8 - g).max(0.0);
        assert!((r1 - want).abs() < 1e-4, "gamma {g}: {r1} vs {want}");
    }
    assert_eq!(std::fs::read_dir(&dump).unwrap().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn single_point_sweep_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let spec = export_erasure(dir.path());
    let text = ok(&["sweep", "--spec", &spec, "--gamma", "0.5", "--restarts", "2"]);
    assert_eq!(rows(&text).len(), 1);
}

#[test]
fn case2_sweep_below_epsilon_exits_3() {
    let dir = TempDir::new().unwrap();
    let spec = export_erasure(dir.path());
    let out = run(&["sweep", "--spec", &spec, "--d1", "0", "--d2", "max", "--gamma", "0.05,0.1,0.15", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_case1_matches_closed_form() {
    let text = ok(&[
        "simulate", "--scheme", "case1", "--n", "100000", "--epsilon", "0.2", "--gamma", "0.4", "--seed", "7",
        "--trials", "10",
    ]);
    assert!(text.starts_with("scheme,n,epsilon,gamma,trials,r1_hat,r2_hat,d1_hat,d2_hat,cost_hat,semi_analytic\n"));
    let r = &rows(&text)[0];
    let r1: f64 = r[5].parse().unwrap();
    assert!((r1 - 1.121928).abs() < 0.01, "{text}");
    assert_eq!(r[8], "0");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("run{i}.csv"))).collect();
    for p in &paths {
        ok(&["simulate", "--scheme", "case2_ts", "--gamma", "0.6", "--trials", "1", "--seed", "7", "--output", p.to_str().unwrap()]);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    assert!(String::from_utf8(a).unwrap().trim_end().ends_with(",1"));
}

#[test]
fn simulate_case3_below_epsilon_exits_3() {
    let out = run(&["simulate", "--scheme", "case3", "--gamma", "0.1", "--epsilon", "0.2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exported_hb_policy_evaluates() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("hb.json");
    let policy = dir.path().join("hbp.json");
    ok(&["export-spec", "--node3", "--output", spec.to_str().unwrap()]);
    ok(&["export-policy", "--case", "hb_case2", "--gamma", "0.6", "--d3", "0.4", "--output", policy.to_str().unwrap()]);
    let report = ok(&["evaluate", "--spec", spec.to_str().unwrap(), "--policy", policy.to_str().unwrap()]);
    let d3: f64 = report.lines().find_map(|l| l.strip_prefix("D3 = ")).unwrap().parse().unwrap();
    assert!(d3 <= 0.4 + 1e-9, "{report}");
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = bin().env("VENDINGRD_THREADS", "zero").args(["closed-form", "--case", "case1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

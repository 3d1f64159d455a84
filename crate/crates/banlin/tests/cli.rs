use std::path::Path;
use std::process::{Command, Output};

fn banlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_banlin")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn small_run_writes_one_row_per_seed_and_round() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = banlin(&["run", "--setting", "hypercube", "--d", "3", "--n", "3", "--seeds", "2", "--adversary", "zero", "--out-dir", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "seed,t,exploration_flag,realized_loss,cum_loss,cum_pseudo_regret");
    let rows = rows(&csv);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
    let seeds: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(seeds, ["0", "0", "0", "1", "1", "1"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(!report["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn emitted_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = banlin(&["run", "--setting", "finite", "--d", "4", "--n", "500", "--actions", "corners", "--emit-config"]);
    assert_eq!(code(&o), 0);
    let file = dir.path().join("c.json");
    std::fs::write(&file, &o.stdout).unwrap();
    let again = banlin(&["run", "--config", path(&file), "--emit-config"]);
    assert_eq!(code(&again), 0, "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(o.stdout, again.stdout);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["N"], 16);
    assert!(v["eta"].is_number() && v["gamma"].is_number());
}

#[test]
fn strict_precondition_violation_exits_one() {
    let o = banlin(&["run", "--setting", "ball", "--d", "5", "--n", "100", "--eta", "0.3", "--strict", "--emit-config"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&banlin(&["run", "--setting", "bogus"])), 2);
    assert_eq!(code(&banlin(&["run", "--no-such-flag"])), 2);
    assert_eq!(code(&banlin(&["run", "--setting", "ball", "--N", "4", "--emit-config"])), 2);
    assert_eq!(code(&banlin(&["run", "--jobs", "0", "--n", "2", "--seeds", "1"])), 2);
    assert_eq!(code(&banlin(&["verify", "--scale", "0"])), 2);
    assert_eq!(code(&banlin(&["john", "--points", "/nonexistent/points.csv"])), 2);
}

#[test]
fn john_prints_weights_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("square.csv");
    std::fs::write(&file, "x,y\n1,1\n1,-1\n-1,1\n-1,-1\n").unwrap();
    let o = banlin(&["john", "--points", path(&file)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    let w: f64 = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((w - 1.0).abs() < 1e-12);
}

#[test]
fn failed_run_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let losses = dir.path().join("z.csv");
    // second row lies outside the L1 ball
    std::fs::write(&losses, "1,0\n0.9,0.9\n0,1\n").unwrap();
    let out = dir.path().join("out");
    let spec = format!("file:{}", path(&losses));
    let o = banlin(&["run", "--setting", "hypercube", "--d", "2", "--n", "3", "--seeds", "2", "--adversary", &spec, "--out-dir", path(&out)]);
    assert_eq!(code(&o), 1);
    let left: Vec<_> = std::fs::read_dir(&out).map(|r| r.collect()).unwrap_or_default();
    assert!(left.is_empty(), "{left:?}");
}

#[test]
fn quick_verify_passes() {
    let o = banlin(&["verify", "--scale", "0.02"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

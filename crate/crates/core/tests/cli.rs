use std::fs;
use std::path::PathBuf;

use channelkit::cli::run;
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("channelkit-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn args(v: &[&str]) -> Vec<String> {
    std::iter::once("channelkit").chain(v.iter().copied()).map(String::from).collect()
}

#[test]
fn unknown_flag_exits_one_and_writes_nothing() {
    let dir = scratch("unknown");
    let out = dir.join("gs.json");
    let code = run(args(&["groundstate", "--dim", "3", "--a", "2", "--out", out.to_str().unwrap(), "--no-such-flag"]));
    assert_eq!(code, 1);
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 0);
}

#[test]
fn bad_parameters_exit_one() {
    assert_eq!(run(args(&["params", "--dim", "3", "--a", "-1"])), 1);
    assert_eq!(run(args(&["params", "--dim", "2", "--a", "0"])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(args(&["--help"])), 0);
    assert_eq!(run(args(&["--version"])), 0);
}

#[test]
fn groundstate_writes_envelope_and_profile() {
    let dir = scratch("gs");
    let (out, prof) = (dir.join("gs.json"), dir.join("w.csv"));
    let code = run(args(&[
        "groundstate", "--dim", "3", "--a", "2", "--out", out.to_str().unwrap(), "--profile", prof.to_str().unwrap(), "--points", "11",
    ]));
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "groundstate");
    assert_eq!(v["params"]["N"], 3);
    assert!(v["result"]["m"].as_f64().unwrap() > 0.0);
    let text = fs::read_to_string(&prof).unwrap();
    assert_eq!(text.lines().next().unwrap(), "r,W,LambdaW,AW");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = scratch("config");
    let cfg = dir.join("cfg.json");
    let traj = dir.join("traj.csv");
    fs::write(&cfg, format!(r#"{{"dim": 3, "a": 2.0, "lambdas": [1.0, 0.1], "signs": ["+", "+"], "gamma-exit": 0.3, "out": "{}"}}"#, traj.display())).unwrap();
    let code = run(args(&["modsim", "--config", cfg.to_str().unwrap(), "--gamma-exit", "0.5", "--record-every", "50"]));
    assert_eq!(code, 0);
    let rows: Vec<String> = fs::read_to_string(&traj).unwrap().lines().map(String::from).collect();
    assert_eq!(rows[0], "t,lambda_1,lambda_2,beta_1,beta_2,gamma,H");
    let gamma: f64 = rows.last().unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((gamma - 0.5).abs() < 1e-9, "{gamma}");
}

#[test]
fn evolve_nonlinear_writes_snapshots_and_meta() {
    let dir = scratch("evolve");
    let out = dir.join("run");
    let code = run(args(&[
        "evolve-nonlinear", "--dim", "3", "--a", "2", "--t-final", "0.2", "--snapshot-every", "0.1", "--r-max", "10", "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    let files = meta["result"]["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn pair_files_flow_through_the_linear_commands() {
    let dir = scratch("pair");
    let pair = dir.join("pair.csv");
    let mut text = String::from("r,u0,u1\n");
    for i in 1..=400 {
        let r = i as f64 * 0.05;
        text.push_str(&format!("{r},{},{}\n", (-(r - 5.0f64).powi(2)).exp(), 0.0));
    }
    fs::write(&pair, text).unwrap();
    let moved = dir.join("moved.csv");
    assert_eq!(run(args(&["evolve-linear", "--dim", "3", "--a", "2", "--data", pair.to_str().unwrap(), "--t", "1", "--out", moved.to_str().unwrap()])), 0);
    assert_eq!(fs::read_to_string(&moved).unwrap().lines().count(), 401);
    let proj = dir.join("proj.json");
    assert_eq!(run(args(&["project", "--dim", "3", "--a", "2", "--data", pair.to_str().unwrap(), "--radius", "1", "--out", proj.to_str().unwrap()])), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&proj).unwrap()).unwrap();
    assert!(v["result"]["as_f"].as_f64().unwrap() > 0.0);
}

#[test]
fn acceptance_subset_and_injected_fault() {
    let dir = scratch("acceptance");
    let summary = dir.join("summary.csv");
    assert_eq!(run(args(&["acceptance", "--only", "1,2", "--out", summary.to_str().unwrap()])), 0);
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.starts_with("id,name,group,pass"));
    assert_eq!(text.lines().count(), 3);
    assert_ne!(run(args(&["acceptance", "--only", "1", "--inject-fault", "corrupt-coefficients"])), 0);
    assert_eq!(run(args(&["acceptance", "--inject-fault", "nonsense"])), 1);
}

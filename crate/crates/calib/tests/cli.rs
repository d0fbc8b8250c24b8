use std::path::{Path, PathBuf};
use std::process::Command;

use abmcal::core::abm::SimulationConfig;
use abmcal::core::framework::FrameworkConfig;
use abmcal::core::strategies::{StrategyConfig, StrategyKind};
use abmcal::core::surrogate::Family;
use abmcal::io::write_json;

fn abmcal(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_abmcal"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn simulate(out: &Path, params: &str, seed: &str) -> std::process::Output {
    abmcal(&[
        "simulate", "--params", params, "--days", "30", "--seed", seed, "--population", "300",
        "--initial-infected", "5", "--out", path(out),
    ])
}

#[test]
fn zero_transmission_simulates_no_new_infections() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let status = simulate(&out, "0,0.1,0.05,12,6,0.3,0.02", "3");
    assert!(status.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let counts: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts.len(), 30);
    assert_eq!(counts[0], "5");
    assert!(counts[1..].iter().all(|c| *c == "0"));
}

#[test]
fn exit_codes() {
    assert_eq!(abmcal(&[]).status.code(), Some(2));
    assert_eq!(abmcal(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(abmcal(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(simulate(&out, "0.5,0.1", "1").status.code(), Some(1));
    let missing = abmcal(&["calibrate", "--config", "/nonexistent.json", "--target", "/nonexistent.csv", "--out", path(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}

#[test]
fn toy_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy.csv");
    let run = abmcal(&[
        "ingest", "--csv", path(&fixture("jhu_toy.csv")), "--region", "Toyland", "--from", "2021-01-01",
        "--to", "2021-01-03", "--out", path(&out),
    ]);
    assert!(run.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "day,new_infections\n0,1\n1,2\n2,3\n");
}

#[test]
fn calibrate_writes_result_db_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("target.csv");
    assert!(simulate(&target, "0.6,0.1,0.05,12,6,0.3,0.022", "9").status.success());
    let config = FrameworkConfig {
        abm_min_budget: 20,
        abm_max_budget: 40,
        batch_size: 10,
        strategy: StrategyConfig {
            inner_samples: 50,
            ..StrategyConfig::new(StrategyKind::Dycors)
        },
        surrogate: Some(Family::GradientBoostedTrees),
        simulation: SimulationConfig {
            population: 300,
            initial_infected: 5,
            ..SimulationConfig::default()
        },
        ..FrameworkConfig::default()
    };
    let config_path = dir.path().join("config.json");
    write_json(&config_path, &config).unwrap();
    let (result, db, curves) = (dir.path().join("r.json"), dir.path().join("db.csv"), dir.path().join("curves"));
    let run = abmcal(&[
        "calibrate", "--config", path(&config_path), "--target", path(&target), "--out", path(&result),
        "--db", path(&db), "--curves", path(&curves),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert!(value["optimal_ksts"].as_f64().unwrap() <= 1.0);
    assert_eq!(std::fs::read_to_string(&db).unwrap().lines().count(), 41);
    assert_eq!(std::fs::read_to_string(curves.join("actual.csv")).unwrap().lines().count(), 31);
    assert_eq!(std::fs::read_to_string(curves.join("simulated.csv")).unwrap().lines().count(), 31);
}

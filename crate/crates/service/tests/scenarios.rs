use std::path::PathBuf;
use std::process::Command;

use quota_service::harness::{model, run_scenario, scenario::Scenario};

fn scenario_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_scenarios_pass() {
    let files = scenario_files();
    assert!(files.len() >= 3);
    for path in files {
        let scenario: Scenario = std::fs::read_to_string(&path).unwrap().parse().unwrap();
        let report = run_scenario(&scenario);
        assert!(report.passed(), "{}:\n{report}", path.display());
        assert!(report.steps.iter().any(|s| s.expect.is_some()));
    }
}

#[test]
fn harness_binary_runs_files() {
    for path in scenario_files() {
        let out = Command::new(env!("CARGO_BIN_EXE_harness")).arg("run").arg(&path).output().unwrap();
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{}:\n{stdout}", path.display());
        assert!(stdout.trim_end().ends_with("0 failed"), "{stdout}");
    }
}

#[test]
fn harness_binary_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "check uid=1 gid=1 policy=replica => denied\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_harness")).arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&bad, "launch rockets\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_harness")).arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn service_matches_model_on_random_scenarios() {
    for seed in 0..150 {
        let scenario = Scenario::random(seed, 250);
        let report = run_scenario(&scenario);
        let predicted = model::predict(scenario.steps.iter().map(|s| &s.action));
        let actual = report.outcomes();
        if let Some(i) = (0..actual.len()).find(|&i| actual[i] != predicted[i]) {
            panic!(
                "seed {seed}: step {i} `{}` service={} model={}\n{scenario}",
                report.steps[i].action, actual[i], predicted[i]
            );
        }
    }
}

#[test]
fn random_scenarios_exercise_both_decisions() {
    use quota_service::harness::scenario::Outcome;
    let mut seen = std::collections::HashSet::new();
    for seed in 0..20 {
        seen.extend(run_scenario(&Scenario::random(seed, 250)).outcomes());
    }
    for o in [Outcome::Allowed, Outcome::Denied, Outcome::Ok, Outcome::Error] {
        assert!(seen.contains(&o), "{o} never happened");
    }
}

#[test]
fn same_seed_same_trace() {
    let a = run_scenario(&Scenario::random(7, 400)).to_string();
    let b = run_scenario(&Scenario::random(7, 400)).to_string();
    assert_eq!(a, b);
}

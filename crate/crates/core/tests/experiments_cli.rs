use std::collections::BTreeSet;
use std::process::Command;

use phaselab::experiments::{self, ExperimentConfig, ExperimentKind, CSV_HEADER};
use phaselab::oracles::{PhaseOracleFamily, QueryKind};
use phaselab::purified::{reachable_counter_values, run_purified_transcript, QueryAlgorithm};

fn phaselab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phaselab"));
    cmd.env_remove("PHASELAB_SEED");
    cmd
}

fn strip_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

#[test]
fn verify_bound_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let status = phaselab()
        .args(["verify-bound", "--n", "8", "--q", "0..7", "--trials", "50", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.starts_with("bound-sweep: 408/408 rows within bound"), "{stdout}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 408);
    assert!(text.ends_with('\n'));
}

#[test]
fn epr_check_reports_deviation() {
    let out = phaselab().args(["epr-check", "--n", "12"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("max entrywise deviation"), "{stderr}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
}

#[test]
fn usage_errors() {
    for args in [
        vec!["verify-bound", "--q", "9", "--n", "4"],
        vec!["verify-bound", "--n", "4", "--frobnicate"],
        vec!["verify-bound", "--n", "x"],
        vec!["sweep"],
        vec!["cemm", "--n", "4", "--theta", "1.5"],
    ] {
        let out = phaselab().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind":"bound-sweep","n_values":[4],"extra":true}"#).unwrap();
    let out = phaselab().args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = phaselab();
        cmd.args(["verify-bound", "--n", "4", "--trials", "2"]);
        if let Some(e) = env {
            cmd.env("PHASELAB_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        strip_wall_time(&String::from_utf8(out.stdout).unwrap())
    };
    let by_flag = run(None, Some("5"));
    assert_eq!(run(Some("5"), None), by_flag);
    assert_eq!(run(Some("6"), Some("5")), by_flag);
    assert_ne!(run(Some("6"), None), by_flag);
}

#[test]
fn sweep_from_config_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("r.json");
    std::fs::write(
        &cfg,
        r#"{"kind":"counter-scan","n_values":[4,8],"q_values":[0,2],"trials":2,"seed":3,"format":"json"}"#,
    )
    .unwrap();
    let status = phaselab().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(value["metadata"]["config"]["kind"], "counter-scan");
    assert!(value["metadata"]["tool_version"].is_string());
    let rows = value["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
    for field in CSV_HEADER {
        assert!(rows[0].get(field).is_some(), "missing {field}");
    }
}

#[test]
fn cemm_and_reduction_subcommands() {
    let out = phaselab().args(["cemm", "--n", "8", "--q", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("8,3,truncated,")));
    let out = phaselab()
        .args(["reduction-check", "--n", "4,8", "--p", "0.5", "--trials", "400", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn results_independent_of_worker_count() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::BoundSweep, vec![2, 4, 8]);
    cfg.trials = 4;
    cfg.seed = 99;
    let a = experiments::run(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| experiments::run(&cfg)).unwrap();
    let strip = |r: &experiments::ExperimentResult| strip_wall_time(&r.to_csv_string().unwrap());
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn inverse_schedule_reaches_zero_and_minus_one() {
    let n = 8;
    let kinds = vec![QueryKind::Inverse];
    assert_eq!(reachable_counter_values(&kinds, n), BTreeSet::from([0, n - 1]));
    let family = PhaseOracleFamily::standard(n).unwrap();
    for seed in 0..5 {
        let alg = QueryAlgorithm::haar_random(n, 2, kinds.clone(), seed).unwrap();
        let t = run_purified_transcript(&alg, &family).unwrap();
        assert!(t.leakage_outside_after(1, &BTreeSet::from([0, n - 1])) <= 1e-10);
    }
}

#[test]
fn power_then_forward_reaches_every_subset_sum() {
    let n = 8;
    let kinds = vec![QueryKind::Power(2), QueryKind::Forward];
    let reachable = reachable_counter_values(&kinds, n);
    assert_eq!(reachable, BTreeSet::from([0, 1, 2, 3]));
    let family = PhaseOracleFamily::standard(n).unwrap();
    let mut weight_on_one: f64 = 0.0;
    for seed in 0..5 {
        let alg = QueryAlgorithm::haar_random(n, 2, kinds.clone(), seed).unwrap();
        let t = run_purified_transcript(&alg, &family).unwrap();
        assert!(t.leakage_outside_after(2, &reachable) <= 1e-10);
        weight_on_one = weight_on_one.max(t.counter_weights[2][1]);
    }
    // Skipping the first query and taking the second lands on 1.
    assert!(weight_on_one > 1e-3);
}

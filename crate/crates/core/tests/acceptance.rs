//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use phaselab::algorithms::{build_cemm, build_truncated_optimal, cemm_on_continuous_phase, epr_deviation};
use phaselab::experiments::{
    self, adversarial_search, ExperimentConfig, ExperimentKind, ExperimentResult, SearchSettings,
};
use phaselab::oracles::{PhaseInstance, PhaseOracleFamily};
use phaselab::purified::{run_purified, success_probability_average};

const SEED: u64 = 20_261_015;
const LEAKAGE_TOL: f64 = 1e-10;
const BOUND_SLACK: f64 = 1e-9;
const PROB_TOL: f64 = 1e-9;
const AMP_TOL: f64 = 1e-10;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn bound(n: usize, q: usize) -> f64 {
    (q + 1) as f64 / n as f64
}

fn grid_config(kind: ExperimentKind, ns: &[usize], q_max: usize, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, ns.to_vec());
    cfg.q_values = (0..=q_max).collect();
    cfg.trials = trials;
    cfg.seed = SEED;
    cfg
}

fn counter_sparsity(sweep: &Result<ExperimentResult, String>) -> Check {
    let sweep = sweep.as_ref().map_err(Clone::clone)?;
    let haar = sweep.rows.iter().filter(|r| r.kind == "haar").count();
    let expected: usize = [2usize, 4, 8, 16, 32, 64].iter().map(|&n| 25 * n.min(13)).sum();
    if haar != expected {
        return Err(format!("expected {expected} Haar rows, got {haar}"));
    }
    let worst = sweep.rows.iter().max_by(|a, b| a.max_leakage.total_cmp(&b.max_leakage)).unwrap();
    let msg = format!(
        "{haar} (n, q, algorithm) points; max leakage {:.2e} at n={}, q={}",
        worst.max_leakage, worst.n, worst.q
    );
    if worst.max_leakage <= LEAKAGE_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn upper_bound(sweep: &Result<ExperimentResult, String>) -> Check {
    let sweep = sweep.as_ref().map_err(Clone::clone)?;
    let mut excess =
        sweep.rows.iter().map(|r| r.observed_probability - r.bound_value).fold(f64::NEG_INFINITY, f64::max);

    let search_cfg = grid_config(ExperimentKind::RandomStress, &[2, 4, 8, 16], 12, 200);
    let search = experiments::run(&search_cfg).map_err(|e| e.to_string())?;
    let closest = search.rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    excess = search.rows.iter().map(|r| r.observed_probability - r.bound_value).fold(excess, f64::max);

    for n in [2usize, 4, 8, 16] {
        let q = n / 2;
        let family = PhaseOracleFamily::standard(n).map_err(|e| e.to_string())?;
        let opt = build_truncated_optimal(n, q).map_err(|e| e.to_string())?;
        let out = adversarial_search(&family, q, &SearchSettings::new(2 * (q + 1), SEED), Some(&opt))
            .map_err(|e| e.to_string())?;
        excess = excess.max(out.best_success - bound(n, q));
    }

    let msg = format!(
        "{} sweep rows, {} searches x 200 iterations, 4 optimal starts; max observed - bound {excess:.2e}; \
         closest search gap {closest:.2e}",
        sweep.rows.len(),
        search.rows.len()
    );
    if excess <= BOUND_SLACK {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn tightness() -> Check {
    let mut worst = (0.0f64, 0, 0);
    let mut count = 0;
    for n in 2..=32 {
        let family = PhaseOracleFamily::standard(n).map_err(|e| e.to_string())?;
        for q in 0..n {
            let alg = build_truncated_optimal(n, q).map_err(|e| e.to_string())?;
            let p = success_probability_average(&alg, &family).map_err(|e| e.to_string())?;
            let err = (p - bound(n, q)).abs();
            if err > worst.0 {
                worst = (err, n, q);
            }
            count += 1;
        }
    }
    let msg = format!("{count} (n, q) pairs; max |success - (q+1)/n| {:.2e} at n={}, q={}", worst.0, worst.1, worst.2);
    if worst.0 <= PROB_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cemm_equivalence() -> Check {
    let mut worst = (0.0f64, 0);
    for n in 2..=16 {
        let family = PhaseOracleFamily::standard(n).map_err(|e| e.to_string())?;
        let a = run_purified(&build_cemm(n).map_err(|e| e.to_string())?, &family).map_err(|e| e.to_string())?;
        let b = run_purified(&build_truncated_optimal(n, n - 1).map_err(|e| e.to_string())?, &family)
            .map_err(|e| e.to_string())?;
        let d = a.max_abs_diff(&b).map_err(|e| e.to_string())?;
        if d >= worst.0 {
            worst = (d, n);
        }
    }
    let msg = format!("n = 2..16; max entrywise difference {:.2e} at n={}", worst.0, worst.1);
    if worst.0 <= AMP_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn epr_identity() -> Check {
    let mut worst = (0.0f64, 0);
    for n in 1..=32 {
        let d = epr_deviation(n).map_err(|e| e.to_string())?;
        if d >= worst.0 {
            worst = (d, n);
        }
    }
    let msg = format!("n = 1..32; max entrywise deviation {:.2e} at n={}", worst.0, worst.1);
    if worst.0 <= AMP_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn counter_arithmetic() -> Check {
    let cfg = grid_config(ExperimentKind::CounterScan, &[16], 15, 100);
    let result = experiments::run(&cfg).map_err(|e| e.to_string())?;
    let mixed: Vec<_> = result.rows.iter().filter(|r| r.kind == "counter-mixed").collect();
    let schedules = mixed.iter().map(|r| r.trial).collect::<std::collections::BTreeSet<_>>().len();
    if schedules != 100 || mixed.len() != 100 * 16 {
        return Err(format!("expected 100 schedules x 16 prefixes, got {schedules} / {}", mixed.len()));
    }
    let leak = mixed.iter().map(|r| r.max_leakage).fold(0.0, f64::max);
    let msg = format!("100 schedules of length 15 at n=16; max leakage outside reachable set {leak:.2e}");
    if leak <= LEAKAGE_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reduction() -> Check {
    let ps = [0.3, 0.6, 0.9];
    let trials = 1000;
    let mut cfg = ExperimentConfig::new(ExperimentKind::ReductionCheck, vec![4, 8, 16]);
    cfg.p_values = Some(ps.to_vec());
    cfg.trials = trials;
    cfg.seed = SEED;
    let result = experiments::run(&cfg).map_err(|e| e.to_string())?;
    if result.rows.len() != 9 {
        return Err(format!("expected 9 cells, got {}", result.rows.len()));
    }
    let mut worst = (f64::INFINITY, 0, 0.0);
    for r in &result.rows {
        let p = ps[r.trial];
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let margin = (r.observed_probability - p) / se;
        if margin < worst.0 {
            worst = (margin, r.n, p);
        }
    }
    let msg =
        format!("9 (N, p) cells x {trials} trials; smallest margin {:+.2} SE at N={}, p={}", worst.0, worst.1, worst.2);
    if worst.0 >= -2.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mid_grid() -> Check {
    let target = 4.0 / std::f64::consts::PI.powi(2);
    let mut parts = Vec::new();
    let mut at_64 = f64::NAN;
    for n in [8usize, 16, 32, 64] {
        let mut p_max = f64::NEG_INFINITY;
        let mut p_min = f64::INFINITY;
        for k in [0, n / 3, n - 1] {
            let theta = (k as f64 + 0.5) / n as f64;
            let inst = PhaseInstance::standard(theta).map_err(|e| e.to_string())?;
            let dist = cemm_on_continuous_phase(&inst, n).map_err(|e| e.to_string())?;
            let p = dist.iter().copied().fold(0.0, f64::max);
            p_max = p_max.max(p);
            p_min = p_min.min(p);
        }
        if p_max - p_min > PROB_TOL {
            return Err(format!("mid-grid probability depends on the bin at n={n}: {p_min} vs {p_max}"));
        }
        parts.push(format!("n={n}: {p_max:.6}"));
        at_64 = p_max;
    }
    let msg = format!("{}; 4/pi^2 = {target:.6}; |diff| at n=64 {:.2e}", parts.join(", "), (at_64 - target).abs());
    if (at_64 - target).abs() <= 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Check {
    let run = |jobs: &str| -> Result<Vec<String>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_phaselab"))
            .env_remove("PHASELAB_SEED")
            .args(["verify-bound", "--n", "2,4,8,16", "--q", "0..5", "--trials", "20", "--seed", "7", "--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.code() != Some(0) {
            return Err(format!("verify-bound exited with {:?}", out.status.code()));
        }
        let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
        Ok(text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect())
    };
    let a = run("1")?;
    let b = run("2")?;
    let msg = format!("two runs (1 and 2 workers), {} rows each", a.len().saturating_sub(1));
    if a.len() > 1 && a == b {
        Ok(msg)
    } else {
        Err(format!("{msg}; outputs differ"))
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let sweep_cfg = grid_config(ExperimentKind::BoundSweep, &[2, 4, 8, 16, 32, 64], 12, 25);
    let sweep = experiments::run(&sweep_cfg).map_err(|e| e.to_string());
    let sweep_secs = start.elapsed().as_secs_f64();

    let criteria: Vec<Criterion> = vec![
        ("counter sparsity", Box::new(|| counter_sparsity(&sweep))),
        ("upper bound (q+1)/n", Box::new(|| upper_bound(&sweep))),
        ("tightness of truncated-optimal", Box::new(tightness)),
        ("CEMM equals truncated-optimal at q = n-1", Box::new(cemm_equivalence)),
        ("EPR identity", Box::new(epr_identity)),
        ("counter arithmetic for mixed schedules", Box::new(counter_arithmetic)),
        ("estimator-to-PD reduction", Box::new(reduction)),
        ("mid-grid CEMM probability", Box::new(mid_grid)),
        ("determinism of verify-bound", Box::new(determinism)),
    ];

    println!("shared Haar sweep: {sweep_secs:.1} s");
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("criterion {} [{tag}] {name}: {detail} ({secs:.1} s)", i + 1);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
